#pragma once

#include "vleed/rng.hpp"
#include "vleed/tape.hpp"
#include "vleed/tensor.hpp"

namespace vleed {

// Row-wise softmax on a plain tensor (max-subtracted; all outputs > 0).
Tensor softmax_rows(const Tensor& logits);

// z = mu + sigma (.) eps with eps ~ N(0, I) drawn from rng. Gradients flow to
// mu and sigma, never eps. eps_override is a test hook; with it, sigma may be
// zero (degenerate-variance case), otherwise sigma must be > 0 elementwise.
Tape::Ix reparameterize(Tape& tape, Tape::Ix mu, Tape::Ix sigma, Rng& rng,
                        const Tensor* eps_override = nullptr);

}  // namespace vleed
