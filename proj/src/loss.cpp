#include "stzitd/loss.hpp"

#include <cmath>
#include <limits>

#include "stzitd/errors.hpp"

namespace stzitd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoCap = 2.0 - 1e-9;

// Shared core of the positive branch and its partials, on already floored /
// clamped (mu, rho). All logs are of strictly positive quantities here.
double positive_branch(double y, double pi, double mu, double phi, double rho, CellGrads* g) {
  const double r1 = 1.0 - rho;  // < 0
  const double r2 = 2.0 - rho;  // > 0
  const double log_mu = std::log(mu);
  const double mu_1r = std::exp(r1 * log_mu);
  const double mu_2r = std::exp(r2 * log_mu);

  const double a_term = (y * mu_1r / r1 - mu_2r / r2) / phi;

  const double alpha_s = r2 / r1;  // < 0
  const double j_max = std::pow(y, r2) / (r2 * phi);
  const double b_term = -std::log(j_max * std::sqrt(-alpha_s) * y) + j_max * (alpha_s - 1.0);

  const double log_f_bound = std::log1p(-pi) + a_term + b_term;

  if (g) {
    g->d_pi = 1.0 / (1.0 - pi);
    g->d_mu = -(y * std::exp(-rho * log_mu) - mu_1r) / phi;

    const double da_dphi = -a_term / phi;
    const double db_dphi = (1.0 - (alpha_s - 1.0) * j_max) / phi;
    g->d_phi = -(da_dphi + db_dphi);

    const double dtheta = mu_1r * (1.0 - r1 * log_mu) / (r1 * r1);
    const double dkappa = mu_2r * (1.0 - r2 * log_mu) / (r2 * r2);
    const double da_drho = (y * dtheta - dkappa) / phi;
    const double djm_drho = j_max * (-std::log(y) + 1.0 / r2);
    const double dalpha_drho = 1.0 / (r1 * r1);
    const double db_drho = -djm_drho / j_max - 0.5 * dalpha_drho / alpha_s +
                           (alpha_s - 1.0) * djm_drho + j_max * dalpha_drho;
    g->d_rho = -(da_drho + db_drho);
  }
  return -log_f_bound;
}

// Exact zero branch -log(pi + (1-pi) e^-lambda) and partials.
double zero_branch_exact(double pi, double mu, double phi, double rho, CellGrads* g) {
  const double r2 = 2.0 - rho;
  const double log_mu = std::log(mu);
  const double lambda = std::exp(r2 * log_mu) / (r2 * phi);

  const double log_td = std::log1p(-pi) - lambda;  // log((1-pi) e^-lambda), -inf at pi = 1
  double log_s;
  if (pi <= 0.0) {
    log_s = -lambda;
  } else if (pi >= 1.0) {
    log_s = 0.0;
  } else {
    const double log_pi = std::log(pi);
    const double mx = std::max(log_pi, log_td);
    log_s = mx + std::log(std::exp(log_pi - mx) + std::exp(log_td - mx));
  }

  if (g) {
    // w = (1-pi) e^-lambda / S, the Tweedie share of the zero mass.
    const double w = std::exp(log_td - log_s);
    g->d_pi = -(-std::expm1(-lambda)) / std::exp(log_s);
    g->d_mu = w * std::exp((1.0 - rho) * log_mu) / phi;           // w * dlambda/dmu
    g->d_phi = w * (-lambda / phi);                               // w * dlambda/dphi
    g->d_rho = w * lambda * (-log_mu + 1.0 / r2);                 // w * dlambda/drho
  }
  return -log_s;
}

double zero_branch_literal(double pi, double mu, double phi, double rho, CellGrads* g) {
  if (pi <= 0.0 || pi >= 1.0) return kInf;  // log of zero in the literal expression
  const double r2 = 2.0 - rho;
  const double log_mu = std::log(mu);
  const double lambda = std::exp(r2 * log_mu) / (r2 * phi);
  if (g) {
    g->d_pi = -(1.0 / pi - 1.0 / (1.0 - pi));
    g->d_mu = std::exp((1.0 - rho) * log_mu) / phi;
    g->d_phi = -lambda / phi;
    g->d_rho = lambda * (-log_mu + 1.0 / r2);
  }
  return -(std::log(pi) + std::log1p(-pi) - lambda);
}

}  // namespace

double nll_positive_lower_bound(double y, const ZitdParams& z, double epsilon) {
  if (!(y > 0.0)) throw ContractError("nll_positive_lower_bound: y must be > 0");
  if (z.pi >= 1.0) return kInf;
  const double mu = std::max(z.td.mu, epsilon);
  return positive_branch(y, z.pi, mu, z.td.phi, z.td.rho, nullptr);
}

double nll_zero(const ZitdParams& z, const LossConfig& cfg) {
  const double mu = std::max(z.td.mu, cfg.epsilon);
  if (cfg.paper_literal_zero_branch)
    return zero_branch_literal(z.pi, mu, z.td.phi, z.td.rho, nullptr);
  return zero_branch_exact(z.pi, mu, z.td.phi, z.td.rho, nullptr);
}

double zitd_nll_cell(double y, double pi, double mu, double phi, double rho,
                     const LossConfig& cfg, CellGrads* grads, std::size_t* rho_clamp_count) {
  bool mu_floored = false, rho_clamped = false;
  if (mu < cfg.epsilon) {
    mu = cfg.epsilon;
    mu_floored = true;
  }
  if (rho > kRhoCap) {
    rho = kRhoCap;
    rho_clamped = true;
    if (rho_clamp_count) ++*rho_clamp_count;
  }

  double value;
  if (y > 0.0) {
    if (pi >= 1.0) return kInf;
    value = positive_branch(y, pi, mu, phi, rho, grads);
  } else if (cfg.paper_literal_zero_branch) {
    value = zero_branch_literal(pi, mu, phi, rho, grads);
  } else {
    value = zero_branch_exact(pi, mu, phi, rho, grads);
  }

  if (grads) {
    if (mu_floored) grads->d_mu = 0.0;
    if (rho_clamped) grads->d_rho = 0.0;
  }
  return value;
}

LossBreakdown total_loss(const Tensor& y, const ZitdField& field,
                         std::span<const Parameter* const> theta, const LossConfig& cfg) {
  if (!y.same_shape(field.pi))
    throw DimensionError("total_loss: targets " + y.shape_str() + " vs field " +
                         field.pi.shape_str());
  LossBreakdown out;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double v = zitd_nll_cell(y[i], field.pi[i], field.mu[i], field.phi[i], field.rho[i],
                                   cfg, nullptr, nullptr);
    out.data_sum += v;
    if (y[i] > 0.0) ++out.positive_cells;
    else ++out.zero_cells;
  }
  for (const Parameter* p : theta)
    for (std::size_t i = 0; i < p->value.numel(); ++i) out.l2 += p->value[i] * p->value[i];
  out.l2 *= cfg.eta;
  out.total = out.data_sum + out.l2;
  out.mean_per_cell = y.numel() > 0 ? out.data_sum / static_cast<double>(y.numel()) : 0.0;
  return out;
}

double exact_nll_mean(const Tensor& y, const ZitdField& field, double mu_floor) {
  if (!y.same_shape(field.pi))
    throw DimensionError("exact_nll_mean: targets " + y.shape_str() + " vs field " +
                         field.pi.shape_str());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const ZitdParams z{field.pi[i], TweedieParams{std::max(field.mu[i], mu_floor), field.phi[i],
                                                  field.rho[i]}};
    double ld;
    try {
      ld = zitd_log_density(y[i], z);
    } catch (const ConvergenceError&) {
      return kInf;
    }
    if (!std::isfinite(ld)) return kInf;
    sum -= ld;
  }
  return y.numel() > 0 ? sum / static_cast<double>(y.numel()) : 0.0;
}

ValueId zitd_nll_op(Tape& tape, const ZitdHeads& heads, Tensor y, const LossConfig& cfg,
                    std::size_t* rho_clamp_count) {
  const Tensor& pi = tape.value(heads.pi);
  if (!y.same_shape(pi))
    throw DimensionError("zitd_nll_op: targets " + y.shape_str() + " vs field " + pi.shape_str());

  const Tensor& mu = tape.value(heads.mu);
  const Tensor& phi = tape.value(heads.phi);
  const Tensor& rho = tape.value(heads.rho);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i)
    sum += zitd_nll_cell(y[i], pi[i], mu[i], phi[i], rho[i], cfg, nullptr, rho_clamp_count);

  std::vector<ValueId> inputs{heads.pi, heads.mu, heads.phi, heads.rho};
  return tape.custom(
      "zitd_nll", std::move(inputs), Tensor::scalar(sum),
      [y = std::move(y), cfg](const std::vector<Tensor>& in, const Tensor& out_grad,
                              const std::vector<Tensor*>& in_grads) {
        const double g = out_grad[0];
        const Tensor& pi = in[0];
        const Tensor& mu = in[1];
        const Tensor& phi = in[2];
        const Tensor& rho = in[3];
        for (std::size_t i = 0; i < y.numel(); ++i) {
          CellGrads cg;
          zitd_nll_cell(y[i], pi[i], mu[i], phi[i], rho[i], cfg, &cg, nullptr);
          (*in_grads[0])[i] += g * cg.d_pi;
          (*in_grads[1])[i] += g * cg.d_mu;
          (*in_grads[2])[i] += g * cg.d_phi;
          (*in_grads[3])[i] += g * cg.d_rho;
        }
      });
}

ValueId add_l2_penalty(Tape& tape, ValueId loss, std::span<const ValueId> theta_ids, double eta) {
  if (eta == 0.0 || theta_ids.empty()) return loss;
  ValueId acc = tape.sum_squares(theta_ids[0]);
  for (std::size_t i = 1; i < theta_ids.size(); ++i)
    acc = tape.add(acc, tape.sum_squares(theta_ids[i]));
  return tape.add(loss, tape.affine(acc, eta, 0.0));
}

}  // namespace stzitd
