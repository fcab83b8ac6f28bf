#pragma once

#include <span>

#include "stzitd/decoder.hpp"
#include "stzitd/tape.hpp"
#include "stzitd/tweedie.hpp"

namespace stzitd {

struct LossConfig {
  // L2 weight on the parameters, the eta Theta^2 term of the objective
  // (optimizer weight decay is separate). Must be positive in practice: the
  // positive-branch lower bound decreases without limit as the dispersion
  // head grows (its phi-derivative is negative everywhere), so with eta = 0
  // the objective is unbounded below and training drifts into a degenerate
  // all-zero regime within a few epochs.
  double eta = 0.01;
  bool paper_literal_zero_branch = false;
  double epsilon = 1e-5;  // mu floor inside the loss path only
};

// Negated lower bound of the positive-branch log-density:
//   log f >= log(1-pi) + (1/phi)(y mu^(1-rho)/(1-rho) - mu^(2-rho)/(2-rho))
//            - log(j_max sqrt(-alpha_s) y) + j_max (alpha_s - 1)
// with j_max = y^(2-rho)/((2-rho) phi) and alpha_s = (2-rho)/(1-rho) < 0.
// Always at least the exact NLL. Returns +infinity when pi = 1.
double nll_positive_lower_bound(double y, const ZitdParams& z, double epsilon = 1e-5);

// Exact zero branch -log(pi + (1-pi) e^-lambda) via log-sum-exp; the literal
// mode instead negates log(pi) + log(1-pi) - lambda, which is +infinity at
// pi in {0, 1}.
double nll_zero(const ZitdParams& z, const LossConfig& cfg = {});

// Per-cell NLL on raw decoder outputs (mu floored at epsilon, rho clamped
// below 2), with analytic partial derivatives for the tape op. Flooring and
// clamping zero the corresponding partials.
struct CellGrads {
  double d_pi = 0.0, d_mu = 0.0, d_phi = 0.0, d_rho = 0.0;
};
double zitd_nll_cell(double y, double pi, double mu, double phi, double rho,
                     const LossConfig& cfg, CellGrads* grads = nullptr,
                     std::size_t* rho_clamp_count = nullptr);

struct LossBreakdown {
  double total = 0.0;     // data_sum + l2
  double data_sum = 0.0;  // sum over all cells of the branch NLLs
  double l2 = 0.0;        // eta * sum of squared parameter entries
  double mean_per_cell = 0.0;
  std::size_t zero_cells = 0;
  std::size_t positive_cells = 0;
};

// Whole-field loss on plain tensors (no tape); mirrors the training
// objective. Every cell lands in exactly one branch.
LossBreakdown total_loss(const Tensor& y, const ZitdField& field,
                         std::span<const Parameter* const> theta, const LossConfig& cfg = {});

// Mean exact NLL per cell from the series density (the evaluation-side
// likelihood; training keeps the lower bound). Unlike the bound, this
// penalizes dispersion drift, so validation tracked with it catches the
// regime where the bound keeps improving while the real likelihood decays.
// Returns +infinity if any cell's density underflows or its series fails.
double exact_nll_mean(const Tensor& y, const ZitdField& field, double mu_floor = 1e-5);

// Tape node summing zitd_nll_cell over the field; backward uses the analytic
// partials. `rho_clamp_count`, when given, accumulates clamp activations.
ValueId zitd_nll_op(Tape& tape, const ZitdHeads& heads, Tensor y, const LossConfig& cfg,
                    std::size_t* rho_clamp_count = nullptr);

// Adds eta * sum(theta^2) over the given parameter ids to `loss`.
ValueId add_l2_penalty(Tape& tape, ValueId loss, std::span<const ValueId> theta_ids, double eta);

}  // namespace stzitd
