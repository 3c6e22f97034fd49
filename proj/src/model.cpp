#include "vleed/model.hpp"

#include <cmath>

#include "vleed/errors.hpp"

namespace vleed {

void VleedConfig::validate() const {
    if (input_dim == 0 || residual_dim == 0 || class_dim == 0)
        throw ContractViolation("VleedConfig: dimensions must be >= 1");
    if (num_classes < 2) throw ContractViolation("VleedConfig: num_classes must be >= 2");
    if (lambda_rec < 0.0 || beta_r < 0.0 || beta_c < 0.0 || lambda_dis < 0.0)
        throw ContractViolation("VleedConfig: loss weights must be non-negative");
    if (classifier_dropout < 0.0 || classifier_dropout >= 1.0)
        throw ContractViolation("VleedConfig: classifier_dropout must be in [0,1)");
    if (logvar_min > logvar_max) throw ContractViolation("VleedConfig: logvar clamp inverted");
}

MlpSpec VleedConfig::residual_trunk_spec() const {
    MlpSpec s;
    s.layer_widths = {input_dim, residual_hidden, residual_hidden, residual_hidden};
    s.activation = Activation::kPrelu;
    s.activate_last = true;
    return s;
}

MlpSpec VleedConfig::class_trunk_spec() const {
    MlpSpec s;
    s.layer_widths = {input_dim, class_hidden, class_hidden, class_hidden};
    s.activation = Activation::kPrelu;
    s.activate_last = true;
    return s;
}

MlpSpec VleedConfig::head_spec(std::size_t in, std::size_t out) const {
    MlpSpec s;
    s.layer_widths = {in, out};
    s.activation = Activation::kIdentity;
    return s;
}

MlpSpec VleedConfig::decoder_spec() const {
    MlpSpec s;
    s.layer_widths = {residual_dim + class_dim, decoder_hidden, decoder_hidden, decoder_hidden,
                      input_dim};
    s.activation = Activation::kPrelu;
    return s;
}

MlpSpec VleedConfig::classifier_spec() const {
    MlpSpec s;
    s.layer_widths = {residual_dim, classifier_hidden, classifier_hidden, classifier_hidden,
                      num_classes};
    s.activation = Activation::kLeakyRelu;
    s.dropout_rate = classifier_dropout;
    return s;
}

VleedModel init_vleed_model(const VleedConfig& config, Rng& rng) {
    config.validate();
    VleedModel m;
    m.config = config;
    Rng init = rng.stream("model-init");
    init_mlp_params(config.residual_trunk_spec(), "enc_r", m.vae, init);
    init_mlp_params(config.head_spec(config.residual_hidden, config.residual_dim), "enc_r_mu",
                    m.vae, init);
    init_mlp_params(config.head_spec(config.residual_hidden, config.residual_dim), "enc_r_lv",
                    m.vae, init);
    init_mlp_params(config.class_trunk_spec(), "enc_c", m.vae, init);
    init_mlp_params(config.head_spec(config.class_hidden, config.class_dim), "enc_c_mu", m.vae,
                    init);
    init_mlp_params(config.head_spec(config.class_hidden, config.class_dim), "enc_c_lv", m.vae,
                    init);
    init_mlp_params(config.decoder_spec(), "dec", m.vae, init);
    // one learnable prior mean per class, distinct modes at init
    Rng prior = rng.stream("prior-means");
    Tensor means = Tensor::matrix(config.num_classes, config.class_dim);
    for (std::size_t i = 0; i < means.size(); ++i) means[i] = prior.normal();
    m.vae.add("prior_means", std::move(means));
    init_mlp_params(config.classifier_spec(), "clf", m.clf, init);
    return m;
}

namespace {

struct EncoderBind {
    MlpTapeParams trunk, mu_head, lv_head;
};

EncoderHeads encode_with(Tape& t, const VleedModel& m, Tape::Ix x, bool trainable,
                         const MlpSpec& trunk_spec, const char* trunk, const char* mu_head,
                         const char* lv_head, std::size_t latent_dim) {
    const MlpSpec head = m.config.head_spec(trunk_spec.layer_widths.back(), latent_dim);
    Rng unused(0);
    MlpTapeParams tp = bind_mlp(t, m.vae, trunk_spec, trunk, trainable);
    MlpTapeParams mp = bind_mlp(t, m.vae, head, mu_head, trainable);
    MlpTapeParams lp = bind_mlp(t, m.vae, head, lv_head, trainable);
    Tape::Ix h = mlp_forward(t, trunk_spec, tp, x, false, unused);
    Tape::Ix mu = mlp_forward(t, head, mp, h, false, unused);
    Tape::Ix logvar = t.clamp(mlp_forward(t, head, lp, h, false, unused), m.config.logvar_min,
                              m.config.logvar_max);
    Tape::Ix sigma = t.exp(t.scale(logvar, 0.5));
    require_finite(t.value(mu), "encode: mu");
    require_finite(t.value(sigma), "encode: sigma");
    return {mu, sigma};
}

}  // namespace

EncoderHeads encode_residual_t(Tape& t, const VleedModel& m, Tape::Ix x, bool trainable) {
    return encode_with(t, m, x, trainable, m.config.residual_trunk_spec(), "enc_r", "enc_r_mu",
                       "enc_r_lv", m.config.residual_dim);
}

EncoderHeads encode_class_t(Tape& t, const VleedModel& m, Tape::Ix x, bool trainable) {
    return encode_with(t, m, x, trainable, m.config.class_trunk_spec(), "enc_c", "enc_c_mu",
                       "enc_c_lv", m.config.class_dim);
}

Tape::Ix decode_t(Tape& t, const VleedModel& m, Tape::Ix z_r, Tape::Ix z_c, bool trainable) {
    const MlpSpec spec = m.config.decoder_spec();
    Rng unused(0);
    MlpTapeParams p = bind_mlp(t, m.vae, spec, "dec", trainable);
    Tape::Ix raw = mlp_forward(t, spec, p, t.concat_cols(z_r, z_c), false, unused);
    return t.row_normalize(raw);
}

Tape::Ix classifier_probs_t(Tape& t, const VleedModel& m, Tape::Ix z_r, bool trainable,
                            bool train_mode, Rng& rng) {
    const MlpSpec spec = m.config.classifier_spec();
    MlpTapeParams p = bind_mlp(t, m.clf, spec, "clf", trainable);
    return t.softmax(mlp_forward(t, spec, p, z_r, train_mode, rng));
}

// ---- losses ----

Tape::Ix loss_reconstruction_t(Tape& t, Tape::Ix x, Tape::Ix xhat) {
    const Tensor& vx = t.value(x);
    const Tensor& vh = t.value(xhat);
    require_same_shape(vx, vh, "loss_reconstruction");
    for (std::size_t i = 0; i < vx.rows(); ++i) {
        if (std::abs(l2_norm(vx.data() + i * vx.cols(), vx.cols()) - 1.0) > 1e-6)
            throw ContractViolation("loss_reconstruction: x row not unit-norm");
        if (std::abs(l2_norm(vh.data() + i * vh.cols(), vh.cols()) - 1.0) > 1e-6)
            throw ContractViolation("loss_reconstruction: xhat row not unit-norm");
    }
    Tape::Ix cos = t.sum_cols(t.mul(x, xhat));
    return t.add_scalar(t.scale(t.mean_all(cos), -1.0), 1.0);
}

namespace {

Tape::Ix kl_core(Tape& t, Tape::Ix sq_dev, Tape::Ix sigma) {
    Tape::Ix s2 = t.mul(sigma, sigma);
    Tape::Ix per_dim = t.add_scalar(t.sub(t.add(sq_dev, s2), t.log(s2)), -1.0);
    return t.scale(t.mean_all(t.sum_cols(per_dim)), 0.5);
}

}  // namespace

Tape::Ix loss_kl_residual_t(Tape& t, Tape::Ix mu, Tape::Ix sigma) {
    return kl_core(t, t.mul(mu, mu), sigma);
}

Tape::Ix loss_kl_class_t(Tape& t, Tape::Ix mu, Tape::Ix sigma, Tape::Ix prior_rows) {
    Tape::Ix dev = t.sub(mu, prior_rows);
    return kl_core(t, t.mul(dev, dev), sigma);
}

Tape::Ix loss_classifier_t(Tape& t, Tape::Ix probs, std::vector<int> labels) {
    return t.scale(t.mean_all(t.log(t.gather_labels(probs, std::move(labels)))), -1.0);
}

Tape::Ix loss_disentangle_t(Tape& t, Tape::Ix probs) {
    return t.mean_all(t.sum_cols(t.xlogx(probs)));
}

// ---- plain evaluations ----

std::pair<Tensor, Tensor> encode_residual(const VleedModel& m, const Tensor& x) {
    Tape t;
    EncoderHeads h = encode_residual_t(t, m, t.constant(x), false);
    return {t.value(h.mu), t.value(h.sigma)};
}

std::pair<Tensor, Tensor> encode_class(const VleedModel& m, const Tensor& x) {
    Tape t;
    EncoderHeads h = encode_class_t(t, m, t.constant(x), false);
    return {t.value(h.mu), t.value(h.sigma)};
}

Tensor decode(const VleedModel& m, const Tensor& z_r, const Tensor& z_c) {
    Tape t;
    return t.value(decode_t(t, m, t.constant(z_r), t.constant(z_c), false));
}

double loss_reconstruction(const Tensor& x, const Tensor& xhat) {
    Tape t;
    return t.value(loss_reconstruction_t(t, t.constant(x), t.constant(xhat))).item();
}

double loss_kl_residual(const Tensor& mu, const Tensor& sigma) {
    for (std::size_t i = 0; i < sigma.size(); ++i)
        if (!(sigma[i] > 0.0)) throw ContractViolation("loss_kl_residual: sigma must be > 0");
    Tape t;
    return t.value(loss_kl_residual_t(t, t.constant(mu), t.constant(sigma))).item();
}

double loss_kl_class(const Tensor& mu, const Tensor& sigma, const Tensor& prior_mean) {
    for (std::size_t i = 0; i < sigma.size(); ++i)
        if (!(sigma[i] > 0.0)) throw ContractViolation("loss_kl_class: sigma must be > 0");
    Tape t;
    Tensor prior_rows = Tensor::matrix(mu.rows(), mu.cols());
    if (prior_mean.size() != mu.cols())
        throw ContractViolation("loss_kl_class: prior mean width mismatch");
    for (std::size_t i = 0; i < mu.rows(); ++i)
        for (std::size_t j = 0; j < mu.cols(); ++j) prior_rows(i, j) = prior_mean[j];
    return t
        .value(loss_kl_class_t(t, t.constant(mu), t.constant(sigma), t.constant(prior_rows)))
        .item();
}

double loss_classifier(const Tensor& probs, const std::vector<int>& labels) {
    Tape t;
    return t.value(loss_classifier_t(t, t.constant(probs), labels)).item();
}

double loss_disentangle(const Tensor& probs) {
    Tape t;
    return t.value(loss_disentangle_t(t, t.constant(probs))).item();
}

LossBreakdown combined_loss(const VleedConfig& config, double l_rec, double l_kl_r, double l_kl_c,
                            double l_dis, double l_clf, double lambda_dis_eff) {
    config.validate();
    if (lambda_dis_eff < 0.0) throw ContractViolation("combined_loss: negative lambda_dis");
    LossBreakdown b;
    b.l_rec = l_rec;
    b.l_kl_r = l_kl_r;
    b.l_kl_c = l_kl_c;
    b.l_dis = l_dis;
    b.l_clf = l_clf;
    b.total = config.lambda_rec * l_rec +
              (config.beta_r / static_cast<double>(config.residual_dim)) * l_kl_r +
              (config.beta_c / static_cast<double>(config.class_dim)) * l_kl_c +
              lambda_dis_eff * l_dis;
    return b;
}

LossBreakdown combined_loss(const VleedConfig& config, double l_rec, double l_kl_r, double l_kl_c,
                            double l_dis, double l_clf) {
    return combined_loss(config, l_rec, l_kl_r, l_kl_c, l_dis, l_clf, config.lambda_dis);
}

Tensor infer_release(const VleedModel& m, const Tensor& x) {
    auto [mu, sigma] = encode_residual(m, x);
    for (std::size_t i = 0; i < mu.rows(); ++i) normalize_inplace(mu.data() + i * mu.cols(), mu.cols());
    return mu;
}

double mutual_info_estimate(const VleedModel& m, const Tensor& x, const std::vector<int>& labels,
                            Rng& rng) {
    if (labels.size() != x.rows())
        throw ContractViolation("mutual_info_estimate: label count != rows");
    // empirical label entropy
    std::vector<double> freq(m.config.num_classes, 0.0);
    for (int c : labels) {
        if (c < 0 || static_cast<std::size_t>(c) >= freq.size())
            throw ContractViolation("mutual_info_estimate: label out of range");
        freq[static_cast<std::size_t>(c)] += 1.0;
    }
    double h_c = 0.0;
    for (double f : freq) {
        const double p = f / static_cast<double>(labels.size());
        if (p > 0.0) h_c -= p * std::log(p);
    }
    Tape t;
    EncoderHeads enc = encode_residual_t(t, m, t.constant(x), false);
    Tape::Ix z_r = reparameterize(t, enc.mu, enc.sigma, rng);
    Rng no_dropout(0);
    Tape::Ix probs = classifier_probs_t(t, m, z_r, false, false, no_dropout);
    const double h_c_given_z = -t.value(loss_disentangle_t(t, probs)).item();
    const double mi = h_c - h_c_given_z;
    return mi > 0.0 ? mi : 0.0;
}

void normalize_rows_if_needed(Tensor& x, double tol) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double* row = x.data() + i * x.cols();
        const double r = l2_norm(row, x.cols());
        if (std::abs(r - 1.0) > tol) {
            if (r < 1e-12) throw NumericError("normalize_rows: zero-norm row");
            for (std::size_t j = 0; j < x.cols(); ++j) row[j] /= r;
        }
    }
}

}  // namespace vleed
