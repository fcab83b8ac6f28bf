#include "stzitd/tweedie.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stzitd/rng.hpp"

namespace stzitd {

namespace {

constexpr double kRhoMargin = 1e-9;

double clamp_rho(double rho) {
  return std::min(std::max(rho, 1.0 + kRhoMargin), 2.0 - kRhoMargin);
}

// log sum of exp over a running collection; inputs need not be sorted.
double log_sum_exp(const std::vector<double>& logs) {
  double mx = -INFINITY;
  for (double l : logs) mx = std::max(mx, l);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return mx + std::log(s);
}

}  // namespace

TweedieParams::TweedieParams(double mu_, double phi_, double rho_)
    : mu(mu_), phi(phi_), rho(clamp_rho(rho_)) {
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw ContractError("TweedieParams: mu = " + std::to_string(mu_) + " must be >= 0");
  if (!(phi > 0.0) || !std::isfinite(phi))
    throw ContractError("TweedieParams: phi = " + std::to_string(phi_) + " must be > 0");
  if (!std::isfinite(rho_)) throw ContractError("TweedieParams: rho must be finite");
}

ZitdParams::ZitdParams(double pi_, TweedieParams td_) : pi(pi_), td(td_) {
  if (!(pi >= 0.0 && pi <= 1.0))
    throw ContractError("ZitdParams: pi = " + std::to_string(pi_) + " must be in [0, 1]");
}

CompoundParams compound_params(const TweedieParams& td) {
  const double p1 = td.rho - 1.0;
  const double p2 = 2.0 - td.rho;
  return CompoundParams{
      std::pow(td.mu, p2) / (td.phi * p2),
      p2 / p1,
      td.phi * p1 * std::pow(td.mu, p1),
  };
}

double tweedie_log_density(double y, const TweedieParams& td, const SeriesConfig& cfg) {
  if (!(y >= 0.0)) throw ContractError("tweedie_log_density: y = " + std::to_string(y));
  const double p1 = td.rho - 1.0;
  const double p2 = 2.0 - td.rho;
  const double lambda = std::pow(td.mu, p2) / (td.phi * p2);
  if (y == 0.0) return -lambda;
  if (td.mu == 0.0) return -INFINITY;  // positive value has no density at mu = 0

  // Exponent of the EDM form, (1/phi)(y theta - kappa(theta)).
  const double exponent =
      (y * std::pow(td.mu, 1.0 - td.rho) / (1.0 - td.rho) - std::pow(td.mu, p2) / p2) / td.phi;

  // Series exponent alpha_s = (2-rho)/(1-rho) < 0; term j has
  //   log w_j = j log z - lgamma(1+j) - lgamma(-alpha_s j)
  // with log z collecting the y, phi, rho powers. Terms are unimodal in j
  // with the peak near j_max, so we start there and expand outward until
  // terms drop below relative_term_tolerance of the running maximum.
  const double alpha_s = p2 / (1.0 - td.rho);
  const double log_z = -alpha_s * std::log(y) + alpha_s * std::log(p1) -
                       (1.0 - alpha_s) * std::log(td.phi) - std::log(p2);
  const double j_max = std::max(1.0, std::pow(y, p2) / (p2 * td.phi));
  const double log_tol = std::log(cfg.relative_term_tolerance);

  auto log_term = [&](long j) {
    return j * log_z - std::lgamma(1.0 + j) - std::lgamma(-alpha_s * j);
  };

  auto fail = [&]() {
    std::ostringstream msg;
    msg << "tweedie_log_density: series did not converge within " << cfg.max_terms
        << " terms (y=" << y << ", mu=" << td.mu << ", phi=" << td.phi << ", rho=" << td.rho
        << ")";
    throw ConvergenceError(msg.str());
  };

  const long j0 = std::max(1L, std::lround(j_max));
  std::vector<double> logs;
  logs.reserve(64);
  logs.push_back(log_term(j0));
  double peak = logs.back();

  long terms = 1;
  for (long j = j0 + 1;; ++j) {
    const double lt = log_term(j);
    peak = std::max(peak, lt);
    logs.push_back(lt);
    if (lt < peak + log_tol) break;
    if (++terms > cfg.max_terms) fail();
  }
  for (long j = j0 - 1; j >= 1; --j) {
    const double lt = log_term(j);
    peak = std::max(peak, lt);
    logs.push_back(lt);
    if (lt < peak + log_tol) break;  // reaching j = 1 also completes the sum
    if (++terms > cfg.max_terms) fail();
  }

  // log a(y, phi, rho) = log sum w_j - log y.
  return log_sum_exp(logs) - std::log(y) + exponent;
}

OracleDensity oracle_mixture_log_density(double y, const CompoundParams& cp, int j_terms) {
  if (!(y > 0.0)) throw ContractError("oracle_mixture_log_density: y must be > 0");
  if (j_terms < 1) throw ContractError("oracle_mixture_log_density: j_terms must be >= 1");
  const double log_lambda = std::log(cp.lambda);
  const double log_scale = std::log(cp.gamma_scale);
  const double log_y = std::log(y);
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(j_terms));
  for (int j = 1; j <= j_terms; ++j) {
    const double shape_j = j * cp.gamma_shape;
    const double log_pois = -cp.lambda + j * log_lambda - std::lgamma(j + 1.0);
    const double log_gamma_pdf =
        (shape_j - 1.0) * log_y - y / cp.gamma_scale - std::lgamma(shape_j) - shape_j * log_scale;
    logs.push_back(log_pois + log_gamma_pdf);
  }

  // Geometric bound on the truncated Poisson tail: for J + 2 > lambda,
  // sum_{j>J} pmf(j) <= pmf(J+1) / (1 - lambda/(J+2)).
  const double log_pmf_next = -cp.lambda + (j_terms + 1) * log_lambda - std::lgamma(j_terms + 2.0);
  double tail = std::exp(log_pmf_next);
  if (j_terms + 2 > cp.lambda) tail /= 1.0 - cp.lambda / (j_terms + 2);
  else tail = 1.0;  // bound not applicable; caller chose j_terms too small

  return OracleDensity{log_sum_exp(logs), tail};
}

int oracle_terms_for_tail(double lambda, double tail) {
  int j = std::max(8, static_cast<int>(std::ceil(lambda)));
  while (j < 100000) {
    const double log_pmf_next = -lambda + (j + 1) * std::log(lambda) - std::lgamma(j + 2.0);
    double bound = std::exp(log_pmf_next);
    if (j + 2 > lambda) {
      bound /= 1.0 - lambda / (j + 2);
      if (bound < tail) return j;
    }
    j += 8;
  }
  return j;
}

int oracle_terms_for_density(double y, const CompoundParams& cp, double tail) {
  if (!(y > 0.0)) throw ContractError("oracle_terms_for_density: y must be > 0");
  const int floor_terms = oracle_terms_for_tail(cp.lambda, tail);
  const double log_lambda = std::log(cp.lambda);
  const double log_scale = std::log(cp.gamma_scale);
  const double log_y = std::log(y);
  double peak = -INFINITY;
  for (int j = 1; j < 200000; ++j) {
    const double shape_j = j * cp.gamma_shape;
    const double term = -cp.lambda + j * log_lambda - std::lgamma(j + 1.0) +
                        (shape_j - 1.0) * log_y - y / cp.gamma_scale - std::lgamma(shape_j) -
                        shape_j * log_scale;
    peak = std::max(peak, term);
    if (term < peak - 50.0 && j >= floor_terms) return j;
  }
  return 200000;
}

double zitd_log_density(double y, const ZitdParams& z, const SeriesConfig& cfg) {
  if (!(y >= 0.0)) throw ContractError("zitd_log_density: y = " + std::to_string(y));
  if (y > 0.0) {
    if (z.pi >= 1.0) return -INFINITY;  // degenerate point mass; flagged, never a crash
    return std::log1p(-z.pi) + tweedie_log_density(y, z.td, cfg);
  }
  if (z.pi >= 1.0) return 0.0;
  const double lambda = compound_params(z.td).lambda;
  // log(pi + (1-pi) e^-lambda) via log-sum-exp.
  const double b = std::log1p(-z.pi) - lambda;
  if (z.pi <= 0.0) return b;
  const double a = std::log(z.pi);
  const double mx = std::max(a, b);
  return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
}

double zitd_zero_mass(const ZitdParams& z) {
  const double lambda = compound_params(z.td).lambda;
  return z.pi + (1.0 - z.pi) * std::exp(-lambda);
}

ZitdMoments zitd_moments(const ZitdParams& z) {
  return ZitdMoments{
      (1.0 - z.pi) * z.td.mu,
      z.td.phi * std::pow(z.td.mu, z.td.rho),
  };
}

std::vector<double> sample_zitd(const ZitdParams& z, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ContractError("sample_zitd: n must be >= 1");
  Rng rng(seed);
  const CompoundParams cp = compound_params(z.td);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < z.pi) continue;
    if (z.td.mu == 0.0) continue;  // lambda = 0: the Tweedie component is a point mass at 0
    const long c = rng.poisson(cp.lambda);
    double y = 0.0;
    for (long k = 0; k < c; ++k) y += rng.gamma(cp.gamma_shape, cp.gamma_scale);
    out[i] = y;
  }
  return out;
}

namespace {

// Inclusive empirical quantile: smallest sample v with fraction(<= v) >= q.
double order_statistic(std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return sorted[k - 1];
}

Interval interval_monte_carlo(const ZitdParams& z, double lo_q, double hi_q, std::size_t n,
                              std::uint64_t seed) {
  std::vector<double> s = sample_zitd(z, n, seed);
  std::sort(s.begin(), s.end());
  return Interval{order_statistic(s, lo_q), order_statistic(s, hi_q)};
}

// CDF of the continuous part accumulated by Simpson's rule on a log grid;
// the substitution y = e^s removes the integrable singularity at 0 that
// appears when the Gamma shape is below 1.
class ContinuousCdf {
 public:
  ContinuousCdf(const ZitdParams& z, double hi) : z_(z) {
    const double lo = 1e-16 * std::max(1.0, hi);
    const int panels = 4096;
    s_.resize(panels + 1);
    cum_.resize(panels + 1, 0.0);
    const double s0 = std::log(lo), s1 = std::log(hi);
    const double h = (s1 - s0) / panels;
    auto integrand = [&](double s) {
      const double y = std::exp(s);
      const double ld = zitd_log_density(y, z_);
      return std::isfinite(ld) ? std::exp(ld + s) : 0.0;  // f(y) dy = f(e^s) e^s ds
    };
    double prev = integrand(s0);
    s_[0] = s0;
    for (int i = 1; i <= panels; ++i) {
      const double sa = s0 + (i - 1) * h;
      const double sb = s0 + i * h;
      const double mid = integrand(0.5 * (sa + sb));
      const double cur = integrand(sb);
      cum_[i] = cum_[i - 1] + h / 6.0 * (prev + 4.0 * mid + cur);
      s_[i] = sb;
      prev = cur;
    }
  }

  // Mass of the continuous part on (0, y].
  double operator()(double y) const {
    if (y <= 0.0) return 0.0;
    const double s = std::log(y);
    if (s <= s_.front()) return 0.0;
    if (s >= s_.back()) return cum_.back();
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - s_.begin());
    const double t = (s - s_[i - 1]) / (s_[i] - s_[i - 1]);
    return cum_[i - 1] + t * (cum_[i] - cum_[i - 1]);
  }

  double total() const { return cum_.back(); }

 private:
  ZitdParams z_;
  std::vector<double> s_;
  std::vector<double> cum_;
};

Interval interval_cdf_bisection(const ZitdParams& z, double lo_q, double hi_q) {
  const double zero_mass = zitd_zero_mass(z);
  Interval out{0.0, 0.0};
  if (zero_mass >= hi_q) return out;

  // Expand until the CDF covers the upper quantile.
  double hi = std::max(1.0, 4.0 * z.td.mu);
  ContinuousCdf cdf(z, hi);
  for (int rounds = 0; zero_mass + cdf(hi) < hi_q && rounds < 40; ++rounds) {
    hi *= 2.0;
    cdf = ContinuousCdf(z, hi);
  }

  auto quantile = [&](double q) {
    if (zero_mass >= q) return 0.0;
    double a = 0.0, b = hi;
    for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
      const double m = 0.5 * (a + b);
      if (zero_mass + cdf(m) >= q) b = m;
      else a = m;
    }
    return b;
  };

  out.lower = quantile(lo_q);
  out.upper = quantile(hi_q);
  return out;
}

}  // namespace

Interval zitd_interval(const ZitdParams& z, double lower_q, double upper_q, IntervalMethod method,
                       std::size_t mc_samples, std::uint64_t seed) {
  if (!(lower_q > 0.0 && lower_q < upper_q && upper_q < 1.0))
    throw ContractError("zitd_interval: need 0 < lower_q < upper_q < 1");
  const double zero_mass = zitd_zero_mass(z);
  if (zero_mass >= upper_q) return Interval{0.0, 0.0};
  if (method == IntervalMethod::CdfBisection) return interval_cdf_bisection(z, lower_q, upper_q);
  Interval iv = interval_monte_carlo(z, lower_q, upper_q, mc_samples, seed);
  if (zero_mass >= lower_q) iv.lower = 0.0;  // inclusive atom convention, exact
  return iv;
}

}  // namespace stzitd
