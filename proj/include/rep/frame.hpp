#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rep/matrix.hpp"

namespace rep {

// Covariates plus design metadata: the unit every balance test and
// estimator operates on.
//
// Arms are stored as internal levels 1..Q with level Q the reference.
// Two-arm experiments map external labels {0, 1} to levels {2, 1}, so the
// reference level is always the control group and vectors indexed by level
// are ordered (treated, control) when Q = 2. External arm-size input keeps
// the conventional order: (n_control, n_treated) for two arms and
// (N_1, ..., N_Q) otherwise.
class ExperimentFrame {
 public:
  static ExperimentFrame two_arm(const Matrix& covariates, int n_control,
                                 int n_treated);
  static ExperimentFrame multi_arm(const Matrix& covariates,
                                   const std::vector<int>& level_sizes);
  // Dispatches on sizes.size(): 2 -> two_arm (control, treated).
  static ExperimentFrame from_external(const Matrix& covariates,
                                       const std::vector<int>& sizes);

  int n() const { return static_cast<int>(shared_->x.rows()); }
  int j() const { return static_cast<int>(shared_->x.cols()); }
  int q() const { return q_; }
  bool two_arm_labels() const { return q_ == 2; }

  // Units at internal level (1-based); e(q) = N_q / N.
  int count(int level) const { return counts_[level - 1]; }
  double e(int level) const { return double(count(level)) / n(); }
  int n1() const { return count(1); }        // treated (Q = 2)
  int n0() const { return count(2); }        // control (Q = 2)
  double e1() const { return e(1); }
  double e0() const { return e(2); }

  const Matrix& x() const { return shared_->x; }  // centered
  const Vector& column_means() const { return shared_->means; }
  const Matrix& s2x() const { return shared_->s2x; }  // (N-1)^{-1} X'X

  bool has_assignment() const { return !assignment_.empty(); }
  bool has_outcomes() const { return !outcomes_.empty(); }
  const std::vector<int>& assignment() const { return assignment_; }  // 1..Q
  const Vector& outcomes() const { return outcomes_; }

  // Accepts external labels: {0,1} or {1,2} for two-arm, 1..Q otherwise.
  void set_assignment(const std::vector<int>& external_labels);
  void set_assignment_internal(std::vector<int> levels);
  void clear_assignment() { assignment_.clear(); }
  void set_outcomes(Vector y);

  std::vector<int> assignment_external() const;

  Vector xhat(int level) const;   // covariate mean within a level
  Vector taux_hat() const;        // xhat(1) - xhat(2), Q = 2 only
  Vector xhat_plus() const;       // stacked xhat(q), q = 1..Q-1

  std::vector<int> counts() const { return counts_; }

 private:
  struct Shared {
    Matrix x;
    Vector means;
    Matrix s2x;
  };

  ExperimentFrame(const Matrix& covariates, std::vector<int> counts, int q);

  std::shared_ptr<const Shared> shared_;
  int q_ = 0;
  std::vector<int> counts_;        // by internal level, 1-based offset
  std::vector<int> assignment_;    // internal levels, empty if unset
  Vector outcomes_;
};

}  // namespace rep
