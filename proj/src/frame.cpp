#include "rep/frame.hpp"

#include <cmath>
#include <numeric>

#include "rep/errors.hpp"

namespace rep {

ExperimentFrame::ExperimentFrame(const Matrix& covariates,
                                 std::vector<int> counts, int q)
    : q_(q), counts_(std::move(counts)) {
  if (q_ < 2) throw InvalidFrame("need at least two arms");
  if (static_cast<int>(counts_.size()) != q_)
    throw InvalidFrame("arm size vector length != Q");
  int total = 0;
  for (int c : counts_) {
    if (c < 2) throw InvalidFrame("every arm needs at least two units");
    total += c;
  }
  const int n = static_cast<int>(covariates.rows());
  const int j = static_cast<int>(covariates.cols());
  if (total != n) throw InvalidFrame("arm sizes do not sum to N");

  auto shared = std::make_shared<Shared>();
  shared->x = covariates;
  shared->means.assign(j, 0.0);
  for (int col = 0; col < j; ++col) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += shared->x(i, col);
    m /= n;
    shared->means[col] = m;
    bool constant = true;
    for (int i = 0; i < n; ++i) {
      shared->x(i, col) -= m;
      if (std::fabs(shared->x(i, col)) > 1e-12) constant = false;
    }
    if (constant)
      throw InvalidFrame("covariate column has zero variance");
  }

  if (j > 0) {
    shared->s2x = Matrix(j, j);
    for (int a = 0; a < j; ++a)
      for (int b = a; b < j; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += shared->x(i, a) * shared->x(i, b);
        s /= (n - 1);
        shared->s2x(a, b) = s;
        shared->s2x(b, a) = s;
      }
    cholesky(shared->s2x);  // throws NotPositiveDefinite when singular
  }
  shared_ = std::move(shared);
}

ExperimentFrame ExperimentFrame::two_arm(const Matrix& covariates,
                                         int n_control, int n_treated) {
  // Internal levels: 1 = treated, 2 = control (reference).
  return ExperimentFrame(covariates, {n_treated, n_control}, 2);
}

ExperimentFrame ExperimentFrame::multi_arm(
    const Matrix& covariates, const std::vector<int>& level_sizes) {
  return ExperimentFrame(covariates, level_sizes,
                         static_cast<int>(level_sizes.size()));
}

ExperimentFrame ExperimentFrame::from_external(const Matrix& covariates,
                                               const std::vector<int>& sizes) {
  if (sizes.size() == 2) return two_arm(covariates, sizes[0], sizes[1]);
  return multi_arm(covariates, sizes);
}

void ExperimentFrame::set_assignment(const std::vector<int>& external_labels) {
  if (static_cast<int>(external_labels.size()) != n())
    throw InvalidFrame("assignment length != N");
  std::vector<int> internal(external_labels.size());
  if (q_ == 2) {
    bool zero_one = true;
    for (int z : external_labels)
      if (z != 0 && z != 1) zero_one = false;
    for (std::size_t i = 0; i < external_labels.size(); ++i) {
      int z = external_labels[i];
      if (zero_one)
        internal[i] = (z == 1) ? 1 : 2;
      else if (z == 1 || z == 2)
        internal[i] = z;
      else
        throw InvalidFrame("two-arm assignment labels must be 0/1 or 1/2");
    }
  } else {
    for (std::size_t i = 0; i < external_labels.size(); ++i) {
      int z = external_labels[i];
      if (z < 1 || z > q_)
        throw InvalidFrame("assignment label outside 1..Q");
      internal[i] = z;
    }
  }
  set_assignment_internal(std::move(internal));
}

void ExperimentFrame::set_assignment_internal(std::vector<int> levels) {
  if (static_cast<int>(levels.size()) != n())
    throw InvalidFrame("assignment length != N");
  std::vector<int> seen(q_, 0);
  for (int z : levels) {
    if (z < 1 || z > q_) throw InvalidFrame("assignment level outside 1..Q");
    ++seen[z - 1];
  }
  for (int l = 0; l < q_; ++l)
    if (seen[l] != counts_[l])
      throw InvalidFrame("assignment counts do not match arm sizes");
  assignment_ = std::move(levels);
}

void ExperimentFrame::set_outcomes(Vector y) {
  if (static_cast<int>(y.size()) != n())
    throw InvalidFrame("outcome length != N");
  outcomes_ = std::move(y);
}

std::vector<int> ExperimentFrame::assignment_external() const {
  std::vector<int> out(assignment_.size());
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    if (q_ == 2)
      out[i] = (assignment_[i] == 1) ? 1 : 0;
    else
      out[i] = assignment_[i];
  }
  return out;
}

Vector ExperimentFrame::xhat(int level) const {
  if (!has_assignment()) throw InvalidFrame("frame has no assignment");
  Vector m(j(), 0.0);
  int cnt = 0;
  const Matrix& xm = x();
  for (int i = 0; i < n(); ++i) {
    if (assignment_[i] != level) continue;
    const double* row = xm.row_ptr(i);
    for (int k = 0; k < j(); ++k) m[k] += row[k];
    ++cnt;
  }
  for (double& v : m) v /= cnt;
  return m;
}

Vector ExperimentFrame::taux_hat() const {
  if (q_ != 2) throw WrongArmCount("taux_hat requires Q = 2");
  return xhat(1) - xhat(2);
}

Vector ExperimentFrame::xhat_plus() const {
  Vector out;
  out.reserve(static_cast<std::size_t>(j()) * (q_ - 1));
  for (int level = 1; level < q_; ++level) {
    Vector m = xhat(level);
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

}  // namespace rep
