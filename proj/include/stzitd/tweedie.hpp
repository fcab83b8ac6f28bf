#pragma once

#include <cstdint>
#include <vector>

#include "stzitd/errors.hpp"

namespace stzitd {

// Tweedie distribution with power variance V(mu) = mu^rho restricted to
// rho in (1, 2), where it coincides with a compound Poisson-Gamma law:
//
//   y = sum_{j=1}^{C} g_j,   C ~ Poisson(lambda),   g_j iid Gamma(shape, scale)
//
// with lambda = mu^(2-rho) / (phi (2-rho)), shape = (2-rho)/(rho-1) and
// scale = phi (rho-1) mu^(rho-1). The density has a point mass exp(-lambda)
// at zero and a continuous part on (0, inf):
//
//   f(y) = a(y, phi, rho) exp[(1/phi) (y mu^(1-rho)/(1-rho) - mu^(2-rho)/(2-rho))]
//
// where a(y, phi, rho) for y > 0 is (1/y) times an infinite series summed
// here in log space around its dominating index (Dunn & Smyth 2005). Note
// the series exponent (2-rho)/(1-rho) is negative; it is the negation of the
// Gamma shape above and the two are kept strictly apart in this code.
struct TweedieParams {
  double mu;   // mean, >= 0
  double phi;  // dispersion, > 0
  double rho;  // index, in (1, 2); clamped to [1+1e-9, 2-1e-9] on construction

  TweedieParams(double mu_, double phi_, double rho_);
};

// Two-component mixture: probability pi of an exact zero, else a Tweedie
// draw. Zero mass is pi + (1-pi) exp(-lambda); mean is (1-pi) mu.
struct ZitdParams {
  double pi;  // zero-inflation probability, in [0, 1]
  TweedieParams td;

  ZitdParams(double pi_, TweedieParams td_);
};

// Frequency-severity parameters of the equivalent compound construction.
struct CompoundParams {
  double lambda;       // Poisson mean
  double gamma_shape;  // Gamma shape, (2-rho)/(rho-1) > 0
  double gamma_scale;  // Gamma scale
};

struct SeriesConfig {
  double relative_term_tolerance = 1e-12;
  int max_terms = 10000;
};

CompoundParams compound_params(const TweedieParams& td);

// log f_TD(y). Exactly -lambda at y = 0. Throws ConvergenceError if the
// series needs more than cfg.max_terms terms.
double tweedie_log_density(double y, const TweedieParams& td, const SeriesConfig& cfg = {});

// Truncated Poisson-weighted Gamma mixture, an independent evaluation path
// used to cross-check the series (shares nothing with it beyond lgamma).
// Only valid for y > 0.
struct OracleDensity {
  double log_density;
  double poisson_tail_bound;  // mass of the Poisson tail beyond j_terms
};
OracleDensity oracle_mixture_log_density(double y, const CompoundParams& cp, int j_terms);

// j_terms large enough that the Poisson tail beyond it is below `tail`.
int oracle_terms_for_tail(double lambda, double tail = 1e-15);

// j_terms large enough for the mixture density at y itself: covers the
// Poisson tail criterion above and keeps adding terms until the mixture
// summands have fallen ~50 nats below their peak. At large y the density is
// carried by j far beyond the bulk of the Poisson, so the tail criterion
// alone under-truncates.
int oracle_terms_for_density(double y, const CompoundParams& cp, double tail = 1e-15);

// log f_ZITD(y). For y > 0 with pi = 1 returns -infinity (probability
// zero) rather than failing.
double zitd_log_density(double y, const ZitdParams& z, const SeriesConfig& cfg = {});

// P(y = 0) = pi + (1-pi) exp(-lambda).
double zitd_zero_mass(const ZitdParams& z);

struct ZitdMoments {
  double mean;              // (1-pi) mu
  double tweedie_variance;  // phi mu^rho, variance of the Tweedie component
};
ZitdMoments zitd_moments(const ZitdParams& z);

// n independent draws, deterministic per seed. Each draw is zero with
// probability pi, else the literal Poisson sum of Gamma severities.
std::vector<double> sample_zitd(const ZitdParams& z, std::size_t n, std::uint64_t seed);

struct Interval {
  double lower;
  double upper;
};

enum class IntervalMethod { MonteCarlo, CdfBisection };

// Quantile interval [lower_q, upper_q] under the inclusive convention: the
// q-quantile is the smallest v with CDF(v) >= q, so a zero mass of at least
// q pins that bound to exactly 0. MonteCarlo uses order statistics of
// sample_zitd; CdfBisection integrates the continuous density and bisects.
Interval zitd_interval(const ZitdParams& z, double lower_q = 0.05, double upper_q = 0.95,
                       IntervalMethod method = IntervalMethod::MonteCarlo,
                       std::size_t mc_samples = 2000, std::uint64_t seed = 0);

}  // namespace stzitd
