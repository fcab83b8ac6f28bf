#pragma once

#include <string>
#include <vector>

namespace stzitd {

// Self-contained verification sweeps over the distribution code, shared by
// the `dist-check` CLI command and the acceptance suite.

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Series vs truncated-mixture agreement on the grid
// y in {0.1, 0.2, ..., 10} x mu, phi in {0.5, 1, 2} x rho in {1.2, 1.5, 1.8}.
CheckResult check_series_oracle_equivalence(double tolerance = 1e-6);

// Zero mass plus the integral of the continuous density, 12 settings.
CheckResult check_normalization(double tolerance = 1e-3);

// Monte Carlo zero fraction (3 binomial sigma), mean (1%), and for pi = 0
// variance (3%), at n = 100000.
CheckResult check_monte_carlo_moments(std::size_t n = 100000);

// Positive-branch lower bound dominates the exact NLL over the sweep grid
// y, mu, phi in {0.5, 1, 2} x rho in {1.2, 1.5, 1.8} x pi in {0, 0.5},
// including the closed-form anchor at (y=1, mu=1, phi=1, rho=1.5, pi=0).
CheckResult check_lower_bound(double slack = 1e-9);

std::vector<CheckResult> run_distribution_checks();

}  // namespace stzitd
