#pragma once

#include <cstdint>
#include <vector>

#include "vleed/tape.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    void validate() const;
};

// Adam with bias correction over one Params group.
class AdamState {
public:
    AdamState(const Params& params, AdamConfig cfg);

    // Applies one update in place and bumps params.version. Gradients must
    // align with params.values; non-finite gradients raise NumericError.
    void step(Params& params, const std::vector<Tensor>& grads);

    std::uint64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<Tensor>& first_moment() const { return m_; }
    const std::vector<Tensor>& second_moment() const { return v_; }

private:
    AdamConfig cfg_;
    std::uint64_t step_count_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace vleed
