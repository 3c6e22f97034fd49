#include "vleed/ops.hpp"

#include "vleed/errors.hpp"

namespace vleed {

Tensor softmax_rows(const Tensor& logits) {
    Tape t;
    return t.value(t.softmax(t.constant(logits)));
}

Tape::Ix reparameterize(Tape& tape, Tape::Ix mu, Tape::Ix sigma, Rng& rng,
                        const Tensor* eps_override) {
    const Tensor& vm = tape.value(mu);
    const Tensor& vs = tape.value(sigma);
    require_same_shape(vm, vs, "reparameterize");
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const bool ok = eps_override ? vs[i] >= 0.0 : vs[i] > 0.0;
        if (!ok) throw ContractViolation("reparameterize: sigma must be positive");
    }
    Tensor eps;
    if (eps_override) {
        require_same_shape(vm, *eps_override, "reparameterize eps");
        eps = *eps_override;
    } else {
        eps = Tensor(vm.shape());
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
    }
    return tape.add(mu, tape.mul(sigma, tape.constant(std::move(eps))));
}

}  // namespace vleed
