#include "vleed/adam.hpp"

#include <cmath>

#include "vleed/errors.hpp"

namespace vleed {

void AdamConfig::validate() const {
    if (!(lr > 0.0)) throw ContractViolation("Adam: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ContractViolation("Adam: betas must lie in [0,1)");
    if (!(epsilon > 0.0)) throw ContractViolation("Adam: epsilon must be > 0");
}

AdamState::AdamState(const Params& params, AdamConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    m_.reserve(params.count());
    v_.reserve(params.count());
    for (const Tensor& t : params.values) {
        m_.emplace_back(t.shape());
        v_.emplace_back(t.shape());
    }
}

void AdamState::step(Params& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.count())
        throw ContractViolation("Adam: gradient count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].same_shape(params.values[i]))
            throw ContractViolation("Adam: gradient shape mismatch for " + params.names[i]);
        if (!grads[i].all_finite())
            throw NumericError("Adam: non-finite gradient for " + params.names[i]);
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        Tensor& p = params.values[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
    params.bump();
}

}  // namespace vleed
