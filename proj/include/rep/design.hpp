#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "rep/balance.hpp"
#include "rep/frame.hpp"
#include "rep/rng.hpp"

namespace rep {

// One complete randomization: exactly arm_sizes[k] units per arm, all
// permutations equally likely. Two entries are treated as a two-arm design
// with labels 0/1 and sizes (n_control, n_treated); otherwise labels 1..Q.
std::vector<int> complete_randomization(const std::vector<int>& arm_sizes,
                                        RngStream& rng);

struct DesignResult {
  std::vector<int> assignment;  // external labels, ready for output
  long draws_used = 0;
  double acceptance_rate_estimate = 0.0;
  BalanceReport report;
  BalanceScheme scheme;
};

inline constexpr long kDefaultMaxDraws = 1'000'000;

// Draws complete randomizations until one satisfies the scheme. Progress
// diagnostics go to *progress every 10^4 rejections when provided. Throws
// MaxDrawsExceeded with the attempt count and the best joint p-value seen.
DesignResult rerandomize(const ExperimentFrame& frame,
                         const BalanceScheme& scheme, RngStream& rng,
                         long max_draws = kDefaultMaxDraws,
                         std::ostream* progress = nullptr);

// Monte Carlo acceptance rate over fresh complete randomizations.
// Returns (rate, binomial standard error).
std::pair<double, double> estimate_acceptance_rate(const ExperimentFrame& frame,
                                                   const BalanceScheme& scheme,
                                                   int n_trials,
                                                   RngStream& rng);

}  // namespace rep
