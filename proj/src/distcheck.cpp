#include "stzitd/distcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stzitd/loss.hpp"
#include "stzitd/tweedie.hpp"

namespace stzitd {

namespace {
const std::vector<double> kMuGrid{0.5, 1.0, 2.0};
const std::vector<double> kPhiGrid{0.5, 1.0, 2.0};
const std::vector<double> kRhoGrid{1.2, 1.5, 1.8};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}
}  // namespace

CheckResult check_series_oracle_equivalence(double tolerance) {
  CheckResult r{"series-oracle equivalence", true, ""};
  double worst = 0.0;
  std::string worst_at;
  for (int yi = 1; yi <= 100; ++yi) {
    const double y = yi * 0.1;
    for (double mu : kMuGrid)
      for (double phi : kPhiGrid)
        for (double rho : kRhoGrid) {
          const TweedieParams td{mu, phi, rho};
          const CompoundParams cp = compound_params(td);
          const double series = tweedie_log_density(y, td);
          const int terms = oracle_terms_for_density(y, cp);
          const double oracle = oracle_mixture_log_density(y, cp, terms).log_density;
          const double gap = std::abs(series - oracle);
          if (gap > worst) {
            worst = gap;
            worst_at = "y=" + fmt(y) + " mu=" + fmt(mu) + " phi=" + fmt(phi) + " rho=" + fmt(rho);
          }
        }
  }
  r.pass = worst < tolerance;
  r.detail = "max |series - oracle| = " + fmt(worst) + " at " + worst_at;
  return r;
}

CheckResult check_normalization(double tolerance) {
  CheckResult r{"normalization", true, ""};
  double worst = 0.0;
  std::string worst_at;
  int setting = 0;
  for (double rho : kRhoGrid)
    for (double mu : {0.5, 2.0})
      for (auto [pi, phi] : {std::pair{0.0, 1.0}, std::pair{0.4, 0.7}}) {
        ++setting;
        const ZitdParams z{pi, TweedieParams{mu, phi, rho}};
        // Upper limit: Monte Carlo quantile at 1 - 1e-6.
        std::vector<double> s = sample_zitd(z, 1000000, 17u * setting);
        std::sort(s.begin(), s.end());
        const double q = s[static_cast<std::size_t>(
            std::ceil((1.0 - 1e-6) * static_cast<double>(s.size()))) - 1];
        const double hi = std::max(q, 1e-3);

        // Simpson on a log grid; the substitution removes the y -> 0
        // singularity of the continuous part.
        const int panels = 4000;
        const double s0 = std::log(hi) - 40.0, s1 = std::log(hi);
        const double h = (s1 - s0) / panels;
        auto f = [&](double t) {
          const double yv = std::exp(t);
          const double ld = zitd_log_density(yv, z);
          return std::isfinite(ld) ? std::exp(ld + t) : 0.0;
        };
        double integral = 0.0;
        double prev = f(s0);
        for (int i = 1; i <= panels; ++i) {
          const double a = s0 + (i - 1) * h, b = s0 + i * h;
          const double cur = f(b);
          integral += h / 6.0 * (prev + 4.0 * f(0.5 * (a + b)) + cur);
          prev = cur;
        }
        const double total = zitd_zero_mass(z) + integral;
        const double gap = std::abs(total - 1.0);
        if (gap > worst) {
          worst = gap;
          worst_at = "pi=" + fmt(pi) + " mu=" + fmt(mu) + " phi=" + fmt(phi) + " rho=" + fmt(rho);
        }
      }
  r.pass = worst < tolerance;
  r.detail = "12 settings, max |zero mass + integral - 1| = " + fmt(worst) + " at " + worst_at;
  return r;
}

CheckResult check_monte_carlo_moments(std::size_t n) {
  CheckResult r{"monte carlo moments", true, ""};
  std::ostringstream detail;
  const struct {
    double pi, mu, phi, rho;
    std::uint64_t seed;
  } cases[] = {{0.3, 1.0, 1.0, 1.5, 101}, {0.0, 1.0, 1.0, 1.5, 102}, {0.0, 2.0, 0.5, 1.8, 103}};
  for (const auto& c : cases) {
    const ZitdParams z{c.pi, TweedieParams{c.mu, c.phi, c.rho}};
    const std::vector<double> s = sample_zitd(z, n, c.seed);
    const double nd = static_cast<double>(n);

    std::size_t zeros = 0;
    double sum = 0.0;
    for (double v : s) {
      if (v == 0.0) ++zeros;
      sum += v;
    }
    const double zero_frac = static_cast<double>(zeros) / nd;
    const double mean = sum / nd;

    const double p0 = zitd_zero_mass(z);
    const double sigma = std::sqrt(p0 * (1.0 - p0) / nd);
    const double mean_true = zitd_moments(z).mean;
    if (std::abs(zero_frac - p0) > 3.0 * sigma) {
      r.pass = false;
      detail << "zero fraction " << fmt(zero_frac) << " vs " << fmt(p0) << " off; ";
    }
    if (std::abs(mean - mean_true) > 0.01 * mean_true) {
      r.pass = false;
      detail << "mean " << fmt(mean) << " vs " << fmt(mean_true) << " off; ";
    }
    if (c.pi == 0.0) {
      double ss = 0.0;
      for (double v : s) ss += (v - mean) * (v - mean);
      const double var = ss / (nd - 1.0);
      const double var_true = zitd_moments(z).tweedie_variance;
      if (std::abs(var - var_true) > 0.03 * var_true) {
        r.pass = false;
        detail << "variance " << fmt(var) << " vs " << fmt(var_true) << " off; ";
      }
    }
  }
  if (r.pass) detail << "zero fraction within 3 sigma, mean within 1%, variance within 3%";
  r.detail = detail.str();
  return r;
}

CheckResult check_lower_bound(double slack) {
  CheckResult r{"positive-branch lower bound", true, ""};

  // Closed-form anchor: 8 + log 2.
  const ZitdParams anchor{0.0, TweedieParams{1.0, 1.0, 1.5}};
  const double nll_lb = nll_positive_lower_bound(1.0, anchor);
  const double expected = 8.0 + std::log(2.0);
  if (std::abs(nll_lb - expected) > 1e-6) {
    r.pass = false;
    r.detail = "anchor " + fmt(nll_lb) + " != " + fmt(expected) + "; ";
  }

  double worst_margin = 1e300;
  std::string worst_at;
  for (double y : kMuGrid)  // same {0.5, 1, 2} grid for y
    for (double mu : kMuGrid)
      for (double phi : kPhiGrid)
        for (double rho : kRhoGrid)
          for (double pi : {0.0, 0.5}) {
            const ZitdParams z{pi, TweedieParams{mu, phi, rho}};
            const double bound = nll_positive_lower_bound(y, z);
            const double exact = -zitd_log_density(y, z);
            const double margin = bound - exact;
            if (margin < worst_margin) {
              worst_margin = margin;
              worst_at = "y=" + fmt(y) + " mu=" + fmt(mu) + " phi=" + fmt(phi) +
                         " rho=" + fmt(rho) + " pi=" + fmt(pi);
            }
          }
  if (worst_margin < -slack) r.pass = false;
  r.detail += "min (bound - exact) = " + fmt(worst_margin) + " at " + worst_at;
  return r;
}

std::vector<CheckResult> run_distribution_checks() {
  return {check_series_oracle_equivalence(), check_normalization(), check_monte_carlo_moments(),
          check_lower_bound()};
}

}  // namespace stzitd
