#include "vleed/mlp.hpp"

#include <cmath>

#include "vleed/errors.hpp"

namespace vleed {

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) throw ContractViolation("MlpSpec: need at least 2 layer widths");
    for (std::size_t w : layer_widths)
        if (w == 0) throw ContractViolation("MlpSpec: zero layer width");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ContractViolation("MlpSpec: dropout_rate must be in [0,1)");
    if (!std::isfinite(prelu_init) || !std::isfinite(leaky_slope))
        throw ContractViolation("MlpSpec: non-finite slope");
}

namespace {

std::size_t activation_count(const MlpSpec& spec) {
    return spec.num_layers() - (spec.activate_last ? 0 : 1);
}

std::string wname(const std::string& p, std::size_t l) { return p + ".w" + std::to_string(l); }
std::string bname(const std::string& p, std::size_t l) { return p + ".b" + std::to_string(l); }
std::string aname(const std::string& p, std::size_t l) { return p + ".a" + std::to_string(l); }

}  // namespace

void init_mlp_params(const MlpSpec& spec, const std::string& prefix, Params& params, Rng& rng) {
    spec.validate();
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l];
        const std::size_t fan_out = spec.layer_widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w = Tensor::matrix(fan_in, fan_out);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
        params.add(wname(prefix, l), std::move(w));
        params.add(bname(prefix, l), Tensor::vector(fan_out, 0.0));
    }
    if (spec.activation == Activation::kPrelu)
        for (std::size_t l = 0; l < activation_count(spec); ++l)
            params.add(aname(prefix, l), Tensor::scalar(spec.prelu_init));
}

MlpTapeParams bind_mlp(Tape& tape, const Params& params, const MlpSpec& spec,
                       const std::string& prefix, bool trainable) {
    MlpTapeParams out;
    auto bind = [&](const std::string& name) {
        const std::size_t idx = params.index_of(name);
        return trainable ? tape.param(params, idx) : tape.constant(params.values[idx]);
    };
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        out.weights.push_back(bind(wname(prefix, l)));
        out.biases.push_back(bind(bname(prefix, l)));
    }
    if (spec.activation == Activation::kPrelu)
        for (std::size_t l = 0; l < activation_count(spec); ++l)
            out.slopes.push_back(bind(aname(prefix, l)));
    return out;
}

Tape::Ix mlp_forward(Tape& tape, const MlpSpec& spec, const MlpTapeParams& p, Tape::Ix x,
                     bool train_mode, Rng& rng) {
    spec.validate();
    if (tape.value(x).cols() != spec.in_dim())
        throw ContractViolation("mlp_forward: input width " +
                                std::to_string(tape.value(x).cols()) + " != spec in_dim " +
                                std::to_string(spec.in_dim()));
    Tape::Ix h = x;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        h = tape.add_row(tape.matmul(h, p.weights[l]), p.biases[l]);
        const bool activated = l + 1 < spec.num_layers() || spec.activate_last;
        if (activated) {
            switch (spec.activation) {
                case Activation::kPrelu:
                    h = tape.prelu(h, p.slopes[l]);
                    break;
                case Activation::kLeakyRelu:
                    h = tape.leaky_relu(h, spec.leaky_slope);
                    break;
                case Activation::kIdentity:
                    break;
            }
            if (train_mode && spec.dropout_rate > 0.0) {
                const Tensor& v = tape.value(h);
                Tensor mask(v.shape());
                const double keep = 1.0 - spec.dropout_rate;
                for (std::size_t i = 0; i < mask.size(); ++i)
                    mask[i] = rng.uniform01() >= spec.dropout_rate ? 1.0 / keep : 0.0;
                h = tape.dropout(h, std::move(mask));
            }
        }
        if (!tape.value(h).all_finite())
            throw NumericError("mlp_forward: non-finite activation at layer " + std::to_string(l));
    }
    return h;
}

Tensor mlp_infer(const MlpSpec& spec, const Params& params, const std::string& prefix,
                 const Tensor& x) {
    Tape tape;
    Rng rng(0);  // unused: inference never applies dropout
    MlpTapeParams p = bind_mlp(tape, params, spec, prefix, /*trainable=*/false);
    Tape::Ix y = mlp_forward(tape, spec, p, tape.constant(x), /*train_mode=*/false, rng);
    return tape.value(y);
}

}  // namespace vleed
