#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vleed/tape.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// ---- INLP: iterative nullspace projection ----

struct InlpConfig {
    std::size_t max_iters = 50;
    double stop_margin = 0.02;  // stop once accuracy <= majority + margin
    double clf_lr = 1.0;        // full-batch GD on the bias-free softmax
    std::size_t clf_max_steps = 5000;
    double clf_grad_tol = 1e-6;
};

struct ProjectionOp {
    Tensor matrix;  // d x d, symmetric idempotent
    std::size_t iterations_used = 0;
};

// Repeatedly trains a bias-free linear softmax on the projected embeddings
// and grows the removed subspace with its weight directions until a fresh
// classifier is within stop_margin of the majority fraction.
ProjectionOp inlp_fit(const Tensor& x, const std::vector<int>& labels, const InlpConfig& config);

// Row-wise normalize(P x). Throws NumericError when a projected row collapses.
Tensor inlp_apply(const ProjectionOp& p, const Tensor& x);

// ---- PCA by cyclic Jacobi rotations ----

struct PcaResult {
    Tensor basis;        // d x d, eigenvectors in columns, descending eigenvalue
    Tensor eigenvalues;  // length d
};

PcaResult pca_fit(const Tensor& x);

// ---- IVE: importance-ranked dimension elimination ----

enum class IveSpace { kRaw, kPca };

struct ForestConfig {
    std::size_t num_trees = 50;
    std::size_t max_depth = 4;
    std::size_t feature_subsample = 0;  // per split; 0 means ceil(sqrt(d))
    std::uint64_t seed = 0;
    IveSpace space = IveSpace::kRaw;
};

struct DimRanking {
    std::vector<std::size_t> ordering;  // coordinates, descending importance
    std::vector<double> importance;     // per coordinate, sums to 1
    IveSpace space = IveSpace::kRaw;
    Tensor pca_basis;                   // set when space == kPca
};

// Gini-importance ranking from a bagged ensemble of depth-limited trees,
// computed once over the full coordinate set.
DimRanking ive_rank(const Tensor& x, const std::vector<int>& labels, const ForestConfig& config);

// Optional re-fit variant: eliminates `block` coordinates per round and
// recomputes importances on the reduced data before ranking the rest.
DimRanking ive_rank_iterative(const Tensor& x, const std::vector<int>& labels,
                              const ForestConfig& config, std::size_t block, std::size_t rounds);

// Zeroes the top-n_e ranked coordinates (in PCA space when applicable) and
// renormalizes. n_e == d raises NumericError (all-zero result).
Tensor ive_apply(const DimRanking& ranking, std::size_t n_e, const Tensor& x);

// ---- PFRNet / ASPECD moment matching ----

// Sum over moment orders m=1..max_moment and class pairs of the squared l2
// distance between per-coordinate m-th raw sample moments. labels are
// 0-based; every class up to max(labels) must appear at least twice.
double moment_loss(const Tensor& z, const std::vector<int>& labels, int max_moment);

// Tape-recorded version used inside the training loop.
Tape::Ix moment_loss_t(Tape& t, Tape::Ix z, const std::vector<int>& labels, int num_classes,
                       int max_moment);

// ---- serialization (same container envelope as model checkpoints) ----

inline constexpr const char* kProjectionMagic = "VLEEDP1";
inline constexpr const char* kRankingMagic = "VLEEDR1";

void save_projection(const std::string& path, const ProjectionOp& p);
ProjectionOp load_projection(const std::string& path);
void save_ranking(const std::string& path, const DimRanking& r);
DimRanking load_ranking(const std::string& path);

}  // namespace vleed
