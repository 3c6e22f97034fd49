#pragma once

#include <string>
#include <vector>

#include "vleed/rng.hpp"
#include "vleed/tape.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

enum class Activation { kPrelu, kLeakyRelu, kIdentity };

// A stack of dense layers. layer_widths includes input and output widths.
// The activation (plus dropout, when configured) follows every layer except
// the last; activate_last adds it after the final layer too, which is how
// encoder trunks feed their mu/logvar heads.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::kIdentity;
    double prelu_init = 0.25;       // learnable, one slope per layer
    double leaky_slope = 0.01;      // fixed
    double dropout_rate = 0.0;      // inverted dropout, train mode only
    bool activate_last = false;

    std::size_t num_layers() const { return layer_widths.empty() ? 0 : layer_widths.size() - 1; }
    std::size_t in_dim() const { return layer_widths.front(); }
    std::size_t out_dim() const { return layer_widths.back(); }
    void validate() const;
};

// Parameter leaf ids of one MLP inside a tape, layer by layer.
struct MlpTapeParams {
    std::vector<Tape::Ix> weights;
    std::vector<Tape::Ix> biases;
    std::vector<Tape::Ix> slopes;  // empty unless activation == kPrelu
};

// Appends weight/bias (and PReLU slope) tensors for `spec` to `params`,
// names prefixed `prefix`. Weights are uniform +-sqrt(6/fan_in), biases zero.
void init_mlp_params(const MlpSpec& spec, const std::string& prefix, Params& params, Rng& rng);

// Binds an MLP's tensors (previously created by init_mlp_params with the same
// prefix/spec) as tape leaves. trainable=false binds value copies instead, so
// no gradient can reach the stored parameters (frozen network).
MlpTapeParams bind_mlp(Tape& tape, const Params& params, const MlpSpec& spec,
                       const std::string& prefix, bool trainable);

// Forward pass on the tape. Dropout draws from rng only when train_mode and
// spec.dropout_rate > 0. Throws NumericError naming the layer if any
// activation goes non-finite.
Tape::Ix mlp_forward(Tape& tape, const MlpSpec& spec, const MlpTapeParams& p, Tape::Ix x,
                     bool train_mode, Rng& rng);

// Convenience: tape-free inference for a frozen parameter set.
Tensor mlp_infer(const MlpSpec& spec, const Params& params, const std::string& prefix,
                 const Tensor& x);

}  // namespace vleed
