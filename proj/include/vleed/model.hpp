#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vleed/mlp.hpp"
#include "vleed/ops.hpp"
#include "vleed/rng.hpp"
#include "vleed/tape.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// Split-latent VAE configuration. The four networks are 4 weight layers each:
// encoders are a 3-layer activated trunk feeding parallel mu / log-variance
// heads; decoder and classifier are plain stacks.
struct VleedConfig {
    std::size_t input_dim = 512;
    std::size_t residual_dim = 480;
    std::size_t class_dim = 32;
    std::size_t num_classes = 2;

    double lambda_rec = 1.0;
    double beta_r = 0.1;
    double beta_c = 1.0;
    double lambda_dis = 0.0;

    std::size_t residual_hidden = 512;
    std::size_t class_hidden = 256;
    std::size_t decoder_hidden = 512;
    std::size_t classifier_hidden = 256;
    double classifier_dropout = 0.2;

    double logvar_min = -10.0;
    double logvar_max = 10.0;

    void validate() const;

    MlpSpec residual_trunk_spec() const;
    MlpSpec class_trunk_spec() const;
    MlpSpec head_spec(std::size_t in, std::size_t out) const;
    MlpSpec decoder_spec() const;
    MlpSpec classifier_spec() const;
};

// Parameters split into the two optimizer groups: everything the VAE step
// updates (encoders, decoder, learnable class-prior means) and the auxiliary
// classifier updated by its own inner step.
struct VleedModel {
    VleedConfig config;
    Params vae;
    Params clf;
};

VleedModel init_vleed_model(const VleedConfig& config, Rng& rng);

struct LossBreakdown {
    double l_rec = 0.0;
    double l_kl_r = 0.0;
    double l_kl_c = 0.0;
    double l_dis = 0.0;
    double l_clf = 0.0;
    double total = 0.0;
};

// ---- tape-building forward pieces (used by the training loop) ----

struct EncoderHeads {
    Tape::Ix mu;
    Tape::Ix sigma;  // exp(0.5 * clamped logvar), always > 0
};

EncoderHeads encode_residual_t(Tape& t, const VleedModel& m, Tape::Ix x, bool trainable);
EncoderHeads encode_class_t(Tape& t, const VleedModel& m, Tape::Ix x, bool trainable);
// Decoder output, l2-normalized per row; gradient flows through the norm.
Tape::Ix decode_t(Tape& t, const VleedModel& m, Tape::Ix z_r, Tape::Ix z_c, bool trainable);
// Classifier softmax probabilities on z_r. train_mode controls dropout.
Tape::Ix classifier_probs_t(Tape& t, const VleedModel& m, Tape::Ix z_r, bool trainable,
                            bool train_mode, Rng& rng);

// ---- loss terms (tape) ----

// mean over rows of 1 - cos(x, xhat); both inputs unit-norm rows.
Tape::Ix loss_reconstruction_t(Tape& t, Tape::Ix x, Tape::Ix xhat);
// mean over rows of 1/2 sum_j (mu^2 + sigma^2 - log sigma^2 - 1)
Tape::Ix loss_kl_residual_t(Tape& t, Tape::Ix mu, Tape::Ix sigma);
// as above with (mu - prior)^2; prior_rows is the per-sample prior mean rows
Tape::Ix loss_kl_class_t(Tape& t, Tape::Ix mu, Tape::Ix sigma, Tape::Ix prior_rows);
// mean over rows of -log probs[label]
Tape::Ix loss_classifier_t(Tape& t, Tape::Ix probs, std::vector<int> labels);
// mean over rows of sum_k p_k log p_k  (negative prediction entropy)
Tape::Ix loss_disentangle_t(Tape& t, Tape::Ix probs);

// ---- plain evaluations (no gradients) ----

std::pair<Tensor, Tensor> encode_residual(const VleedModel& m, const Tensor& x);
std::pair<Tensor, Tensor> encode_class(const VleedModel& m, const Tensor& x);
Tensor decode(const VleedModel& m, const Tensor& z_r, const Tensor& z_c);

double loss_reconstruction(const Tensor& x, const Tensor& xhat);
double loss_kl_residual(const Tensor& mu, const Tensor& sigma);
double loss_kl_class(const Tensor& mu, const Tensor& sigma, const Tensor& prior_mean);
double loss_classifier(const Tensor& probs, const std::vector<int>& labels);
double loss_disentangle(const Tensor& probs);

// Weighted total; l_clf is carried for reporting but excluded from the total
// (the classifier is optimized by its own step). lambda_dis_eff lets the
// warmup schedule substitute the effective weight.
LossBreakdown combined_loss(const VleedConfig& config, double l_rec, double l_kl_r,
                            double l_kl_c, double l_dis, double l_clf, double lambda_dis_eff);
LossBreakdown combined_loss(const VleedConfig& config, double l_rec, double l_kl_r,
                            double l_kl_c, double l_dis, double l_clf);

// Released representation: mu_r(x) / ||mu_r(x)||, row-wise, no sampling.
Tensor infer_release(const VleedModel& m, const Tensor& x);

// H(C) - H(C|Z_r) estimated from one reparameterized pass of the auxiliary
// classifier; clipped below at zero. Diagnostic only.
double mutual_info_estimate(const VleedModel& m, const Tensor& x, const std::vector<int>& labels,
                            Rng& rng);

// Checks x rows are unit-norm within tol; renormalizes rows that drift.
void normalize_rows_if_needed(Tensor& x, double tol = 1e-6);

}  // namespace vleed
