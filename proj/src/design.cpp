#include "rep/design.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "rep/errors.hpp"

namespace rep {

std::vector<int> complete_randomization(const std::vector<int>& arm_sizes,
                                        RngStream& rng) {
  if (arm_sizes.size() < 2)
    throw EmptyArm("need at least two arm sizes");
  std::vector<int> labels;
  long total = 0;
  for (std::size_t k = 0; k < arm_sizes.size(); ++k) {
    if (arm_sizes[k] < 1) throw EmptyArm("every arm needs at least one unit");
    total += arm_sizes[k];
  }
  labels.reserve(total);
  const bool binary = arm_sizes.size() == 2;
  for (std::size_t k = 0; k < arm_sizes.size(); ++k) {
    int label = binary ? static_cast<int>(k) : static_cast<int>(k) + 1;
    labels.insert(labels.end(), arm_sizes[k], label);
  }
  rng.shuffle(labels);
  return labels;
}

DesignResult rerandomize(const ExperimentFrame& frame,
                         const BalanceScheme& scheme, RngStream& rng,
                         long max_draws, std::ostream* progress) {
  if (max_draws < 1) throw std::invalid_argument("max_draws must be >= 1");
  scheme.validate(frame.j(), frame.q());

  std::vector<int> external_sizes;
  if (frame.q() == 2)
    external_sizes = {frame.n0(), frame.n1()};
  else
    external_sizes = frame.counts();

  ExperimentFrame working = frame;
  double best_joint_p = std::numeric_limits<double>::quiet_NaN();
  for (long draw = 1; draw <= max_draws; ++draw) {
    std::vector<int> assignment = complete_randomization(external_sizes, rng);
    working.set_assignment(assignment);
    BalanceReport report = evaluate(working, scheme);
    if (report.joint_pvalue &&
        !(best_joint_p >= *report.joint_pvalue))  // NaN-aware max
      best_joint_p = *report.joint_pvalue;
    if (report.accepted) {
      DesignResult result;
      result.assignment = std::move(assignment);
      result.draws_used = draw;
      result.acceptance_rate_estimate = 1.0 / draw;
      result.report = std::move(report);
      result.scheme = scheme;
      return result;
    }
    if (progress && draw % 10000 == 0)
      *progress << "rerandomize: " << draw << " draws rejected so far\n";
  }
  throw MaxDrawsExceeded(
      "no acceptable allocation in " + std::to_string(max_draws) +
          " draws; consider relaxing the thresholds",
      max_draws, best_joint_p);
}

std::pair<double, double> estimate_acceptance_rate(const ExperimentFrame& frame,
                                                   const BalanceScheme& scheme,
                                                   int n_trials,
                                                   RngStream& rng) {
  if (n_trials < 100)
    throw std::invalid_argument("need at least 100 trials");
  scheme.validate(frame.j(), frame.q());

  std::vector<int> external_sizes;
  if (frame.q() == 2)
    external_sizes = {frame.n0(), frame.n1()};
  else
    external_sizes = frame.counts();

  ExperimentFrame working = frame;
  long accepted = 0;
  for (int t = 0; t < n_trials; ++t) {
    working.set_assignment(complete_randomization(external_sizes, rng));
    if (evaluate(working, scheme).accepted) ++accepted;
  }
  double rate = static_cast<double>(accepted) / n_trials;
  double se = std::sqrt(rate * (1.0 - rate) / n_trials);
  return {rate, se};
}

}  // namespace rep
