#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vleed/adam.hpp"
#include "vleed/model.hpp"
#include "vleed/rng.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

enum class TrainMethod {
    kVleed,   // entropy surrogate with classifier inner steps
    kPfrnet,  // moment matching, no classifier inner loop
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 256;
    std::size_t n_clf = 1;           // classifier updates per VAE update
    std::size_t warmup_epochs = 0;   // T; 0 disables the lambda warmup
    AdamConfig clf_adam{1e-4, 0.9, 0.999, 1e-8};
    AdamConfig vae_adam{1e-4, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::size_t moment_order = 4;    // M in pfrnet mode

    void validate() const;
};

struct EpochRecord {
    LossBreakdown losses;     // batch means over the epoch
    double clf_accuracy = 0.0;  // frozen-classifier accuracy on sampled z_r
    double wall_clock_sec = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    std::uint64_t clf_steps = 0;
    std::uint64_t vae_steps = 0;
    std::uint64_t skipped_moment_batches = 0;  // pfrnet batches missing a class
};

// Warmup schedule: lambda_dis when T == 0, else min(1, (epoch+1)/T) * lambda.
double effective_lambda(long long epoch_index, long long warmup_epochs, double lambda_dis);

// Index batches covering every sample exactly once; final partial batch kept.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Rng& rng);

// Trains a fresh model on (x, labels). labels are 0-based and must cover at
// least two classes. x rows are l2-normalized at ingestion when they drift.
// Throws ConfigError on degenerate data and NumericError (with epoch/batch
// context) if a loss goes non-finite.
std::pair<VleedModel, TrainTrace> train_vleed(const Tensor& x, const std::vector<int>& labels,
                                              const VleedConfig& vleed_config,
                                              const TrainConfig& train_config,
                                              TrainMethod method = TrainMethod::kVleed);

}  // namespace vleed
