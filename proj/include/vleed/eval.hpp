#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vleed/adam.hpp"
#include "vleed/mlp.hpp"
#include "vleed/synthdata.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// Leakage probes trained on released representations.
enum class ProbeKind { kLR, kMlpS, kMlpD };

const char* probe_kind_name(ProbeKind k);
ProbeKind probe_kind_from_name(const std::string& name);

struct ProbeConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 256;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
};

struct Probe {
    ProbeKind kind = ProbeKind::kLR;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    Params params;

    MlpSpec spec() const;
};

// Architecture per kind: LR is a bias-full linear softmax; MLP_S is one
// 512-wide linear layer + LeakyReLU + linear head; MLP_D is four 512-unit
// hidden layers with LeakyReLU and dropout 0.2.
MlpSpec probe_spec(ProbeKind kind, std::size_t input_dim, std::size_t num_classes);

Probe train_probe(ProbeKind kind, const Tensor& z_train, const std::vector<int>& labels,
                  const ProbeConfig& config);

// Fraction of argmax-correct predictions; ties go to the lowest class index;
// dropout disabled.
double probe_accuracy(const Probe& probe, const Tensor& z_eval, const std::vector<int>& labels);

double majority_baseline(const std::vector<int>& labels);

// Cosine scores split by pair type, with an optional group tag per score
// (intra-group comparisons drive the fairness metrics).
struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;
    std::vector<std::string> genuine_group;   // parallel to genuine; "" = untagged
    std::vector<std::string> impostor_group;  // parallel to impostor; "" = cross-group
};

ScoreSet verification_scores(const Tensor& embeddings, const PairList& pairs);

struct TmrResult {
    double tmr = 0.0;
    double threshold = 0.0;
    bool quantized = false;  // impostor list too small to resolve fmr_target
};

// Threshold = smallest candidate (sorted impostor scores plus one point past
// the maximum) whose impostor FMR is <= fmr_target; score >= threshold counts
// as a match.
TmrResult tmr_at_fmr(const ScoreSet& scores, double fmr_target);

struct RocPoint {
    double fmr = 0.0;
    double tmr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // fmr ascending, ends pinned at (0,0),(1,1)
    double auc = 0.0;              // trapezoidal
};

RocCurve roc_points(const ScoreSet& scores);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

// Threshold minimizing |FMR - FNMR| with linear interpolation between
// adjacent points of the merged score grid; eer = (FMR+FNMR)/2 there.
EerResult eer_threshold(const ScoreSet& scores);

// Per-group fraction of intra-group impostor scores >= threshold. Groups with
// no impostor scores are omitted (with a warning on stderr).
std::map<std::string, double> group_fmr(const ScoreSet& scores, double threshold);

// Sample-corrected Gini over per-group FMRs, clamped to [0,1]; 0 if mean = 0.
double gini_fmr(const std::vector<double>& per_group_fmr);

struct FairnessReport {
    double system_fmr_target = 0.0;
    double threshold_used = 0.0;
    std::map<std::string, double> per_group_fmr;
    double gini = 0.0;
};

FairnessReport fairness_at(const ScoreSet& scores, double fmr_target);

}  // namespace vleed
