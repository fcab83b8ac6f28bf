#pragma once

#include "stzitd/tape.hpp"
#include "stzitd/tweedie.hpp"

namespace stzitd {

struct EpsilonConfig {
  double epsilon = 1e-5;  // smallest admissible value, in (0, 1e-3]
};

// Four linear heads from the embedding (N x F') to the horizon (N x p).
struct DecoderWeights {
  Parameter w_pi, w_mu, w_phi, w_rho;  // F' x p
  Parameter b_pi, b_mu, b_phi, b_rho;  // p
};

// The four parameter fields over the horizon, as tape values.
struct ZitdHeads {
  ValueId pi, mu, phi, rho;
};

// Plain-tensor view of a decoded field.
struct ZitdField {
  Tensor pi, mu, phi, rho;  // each N x p

  std::size_t n_roads() const { return pi.rows(); }
  std::size_t horizon() const { return pi.cols(); }
  // rho is clamped into (1, 2) by the ZitdParams/TweedieParams constructors.
  ZitdParams at(std::size_t road, std::size_t step) const {
    return ZitdParams{pi.at(road, step),
                      TweedieParams{mu.at(road, step), phi.at(road, step), rho.at(road, step)}};
  }
};

//   pi  = sigmoid(Z W_pi + b_pi)          in (0, 1)
//   mu  = relu(Z W_mu + b_mu)             in [0, inf)
//   phi = relu(Z W_phi + b_phi) + eps     in [eps, inf)
//   rho = sigmoid(Z W_rho + b_rho) + 1 + eps
// rho can exceed 2; consumers clamp it below 2 before distribution use (the
// loss path counts clamp activations, the distribution types clamp silently).
ZitdHeads decode(Tape& tape, ValueId z, ParamBinding& bind, DecoderWeights& w,
                 const EpsilonConfig& eps = {});

ZitdField field_from_heads(const Tape& tape, const ZitdHeads& heads);

}  // namespace stzitd
