#include "stzitd/decoder.hpp"

#include <cassert>

#include "stzitd/errors.hpp"

namespace stzitd {

ZitdHeads decode(Tape& tape, ValueId z, ParamBinding& bind, DecoderWeights& w,
                 const EpsilonConfig& eps) {
  if (!(eps.epsilon > 0.0 && eps.epsilon <= 1e-3))
    throw ContractError("decode: epsilon must be in (0, 1e-3]");

  auto head = [&](Parameter& wm, Parameter& bv) {
    return tape.add_rowvec(tape.matmul(z, bind.use(wm)), bind.use(bv));
  };

  ZitdHeads out;
  out.pi = tape.sigmoid(head(w.w_pi, w.b_pi));
  out.mu = tape.relu(head(w.w_mu, w.b_mu));
  out.phi = tape.affine(tape.relu(head(w.w_phi, w.b_phi)), 1.0, eps.epsilon);
  out.rho = tape.affine(tape.sigmoid(head(w.w_rho, w.b_rho)), 1.0, 1.0 + eps.epsilon);

#ifndef NDEBUG
  const Tensor& pi = tape.value(out.pi);
  const Tensor& mu = tape.value(out.mu);
  const Tensor& phi = tape.value(out.phi);
  const Tensor& rho = tape.value(out.rho);
  for (std::size_t i = 0; i < pi.numel(); ++i) {
    assert(pi[i] > 0.0 && pi[i] < 1.0);
    assert(mu[i] >= 0.0);
    assert(phi[i] >= eps.epsilon);
    assert(rho[i] > 1.0 + eps.epsilon / 2 && rho[i] < 2.0 + eps.epsilon * 2);
  }
#endif
  return out;
}

ZitdField field_from_heads(const Tape& tape, const ZitdHeads& heads) {
  return ZitdField{tape.value(heads.pi), tape.value(heads.mu), tape.value(heads.phi),
                   tape.value(heads.rho)};
}

}  // namespace stzitd
