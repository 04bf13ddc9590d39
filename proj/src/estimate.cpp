#include "rep/estimate.hpp"

#include <cmath>

#include "rep/distributions.hpp"
#include "rep/errors.hpp"
#include "rep/regression.hpp"

namespace rep {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::unadjusted: return "n";
    case EstimatorKind::additive: return "f";
    case EstimatorKind::interacted: return "l";
  }
  return "?";
}

EstimatorKind kind_from_string(const std::string& s) {
  if (s == "n" || s == "N") return EstimatorKind::unadjusted;
  if (s == "f" || s == "F") return EstimatorKind::additive;
  if (s == "l" || s == "L") return EstimatorKind::interacted;
  throw std::invalid_argument("unknown estimator kind: " + s);
}

double EffectEstimate::se_scalar() const { return std::sqrt(ehw_cov(0, 0)); }

namespace {

void require_data(const ExperimentFrame& frame) {
  if (!frame.has_assignment() || !frame.has_outcomes())
    throw InvalidFrame("estimation needs an assignment and outcomes");
}

Vector arm_slope(const ExperimentFrame& frame, int level) {
  const int j = frame.j();
  const int nq = frame.count(level);
  if (nq < j + 2) throw ArmTooSmall("arm too small for a within-arm fit");
  Matrix design(nq, j + 1);
  Vector y(nq);
  int r = 0;
  for (int i = 0; i < frame.n(); ++i) {
    if (frame.assignment()[i] != level) continue;
    design(r, 0) = 1.0;
    for (int k = 0; k < j; ++k) design(r, k + 1) = frame.x()(i, k);
    y[r] = frame.outcomes()[i];
    ++r;
  }
  OlsFit fit = ols_fit(design, y);
  return Vector(fit.coefficients.begin() + 1, fit.coefficients.end());
}

}  // namespace

std::vector<Vector> per_arm_slopes(const ExperimentFrame& frame) {
  require_data(frame);
  std::vector<Vector> out;
  out.reserve(frame.q());
  for (int level = 1; level <= frame.q(); ++level)
    out.push_back(arm_slope(frame, level));
  return out;
}

EffectEstimate estimate_two_arm(const ExperimentFrame& frame,
                                EstimatorKind kind, double level) {
  if (frame.q() != 2) throw WrongArmCount("two-arm estimator needs Q = 2");
  require_data(frame);
  const int n = frame.n(), j = frame.j();

  int p = 0;
  switch (kind) {
    case EstimatorKind::unadjusted: p = 2; break;
    case EstimatorKind::additive: p = 2 + j; break;
    case EstimatorKind::interacted: p = 2 + 2 * j; break;
  }
  Matrix design(n, p);
  for (int i = 0; i < n; ++i) {
    const double z = frame.assignment()[i] == 1 ? 1.0 : 0.0;
    design(i, 0) = 1.0;
    design(i, 1) = z;
    if (kind != EstimatorKind::unadjusted)
      for (int k = 0; k < j; ++k) design(i, 2 + k) = frame.x()(i, k);
    if (kind == EstimatorKind::interacted)
      for (int k = 0; k < j; ++k) design(i, 2 + j + k) = z * frame.x()(i, k);
  }
  if (kind == EstimatorKind::interacted &&
      (frame.n1() < j + 2 || frame.n0() < j + 2))
    throw ArmTooSmall("interacted fit needs J + 2 units per arm");

  OlsFit fit = ols_fit(design, frame.outcomes());

  EffectEstimate est;
  est.kind = kind;
  est.level = level;
  est.point = {fit.coefficients[1]};
  est.ehw_cov = Matrix{{fit.ehw_cov(1, 1)}};

  const double z_crit =
      quantile(DistributionId::normal(), 1.0 - (1.0 - level) / 2.0);
  const double se = est.se_scalar();
  est.normal_ci = {{est.point[0] - z_crit * se, est.point[0] + z_crit * se}};

  // Plug-in ingredients; skipped when an arm cannot support the
  // within-arm fit (the point estimate itself does not need them).
  try {
    est.gamma_hats = per_arm_slopes(frame);
  } catch (const ArmTooSmall&) {
    return est;
  }
  const Vector& g1 = est.gamma_hats[0];  // treated
  const Vector& g0 = est.gamma_hats[1];  // control
  const Matrix& s2x = frame.s2x();
  const double e1 = frame.e1(), e0 = frame.e0();
  Vector cn(j), cf(j);
  for (int k = 0; k < j; ++k) {
    cn[k] = g0[k] / e0 + g1[k] / e1;
    cf[k] = (1.0 / e1 - 1.0 / e0) * (g1[k] - g0[k]);
  }
  est.c_hat_n = s2x * cn;
  est.c_hat_f = s2x * cf;
  return est;
}

ArmMeansFit estimate_multi_arm(const ExperimentFrame& frame,
                               EstimatorKind kind) {
  require_data(frame);
  const int n = frame.n(), j = frame.j(), q = frame.q();

  int p = 0;
  switch (kind) {
    case EstimatorKind::unadjusted: p = q; break;
    case EstimatorKind::additive: p = q + j; break;
    case EstimatorKind::interacted: p = q * (1 + j); break;
  }
  if (kind == EstimatorKind::interacted)
    for (int level = 1; level <= q; ++level)
      if (frame.count(level) < j + 2)
        throw ArmTooSmall("interacted fit needs J + 2 units per arm");

  Matrix design(n, p);
  for (int i = 0; i < n; ++i) {
    const int level = frame.assignment()[i];
    design(i, level - 1) = 1.0;
    if (kind == EstimatorKind::additive)
      for (int k = 0; k < j; ++k) design(i, q + k) = frame.x()(i, k);
    if (kind == EstimatorKind::interacted)
      for (int k = 0; k < j; ++k)
        design(i, q + (level - 1) * j + k) = frame.x()(i, k);
  }
  OlsFit fit = ols_fit(design, frame.outcomes());

  ArmMeansFit out;
  out.y_hat.assign(fit.coefficients.begin(), fit.coefficients.begin() + q);
  out.ehw_cov = Matrix(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) out.ehw_cov(a, b) = fit.ehw_cov(a, b);
  if (kind == EstimatorKind::interacted) {
    out.gamma_hats.resize(q);
    for (int level = 0; level < q; ++level)
      out.gamma_hats[level] =
          Vector(fit.coefficients.begin() + q + level * j,
                 fit.coefficients.begin() + q + (level + 1) * j);
  }
  return out;
}

Contrast::Contrast(Matrix m) : g(std::move(m)) {
  if (g.rows() == 0) throw DimMismatch("contrast needs at least one row");
  for (std::size_t r = 0; r < g.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c);
    if (std::fabs(s) > 1e-12)
      throw std::invalid_argument("contrast rows must sum to zero");
  }
}

Contrast Contrast::difference_two_arm() {
  return Contrast(Matrix{{1.0, -1.0}});
}

std::pair<Vector, Matrix> apply_contrast(const Vector& y_hat,
                                         const Matrix& vcov,
                                         const Contrast& contrast) {
  if (contrast.g.cols() != y_hat.size())
    throw DimMismatch("contrast width != estimate length");
  Vector tau = contrast.g * y_hat;
  Matrix cov = contrast.g * vcov * contrast.g.transposed();
  cov.symmetrize();
  return {tau, cov};
}

Interval plugin_inference(const EffectEstimate& estimate,
                          const ExperimentFrame& frame,
                          const BalanceScheme& scheme, double level,
                          long law_draws, RngStream& rng) {
  if (frame.q() != 2) throw WrongArmCount("two-arm plug-in needs Q = 2");
  require_data(frame);

  // The interacted estimator keeps its complete-randomization law.
  if (estimate.kind == EstimatorKind::interacted) {
    const double z_crit =
        quantile(DistributionId::normal(), 1.0 - (1.0 - level) / 2.0);
    const double se = estimate.se_scalar();
    return {estimate.point_scalar() - z_crit * se,
            estimate.point_scalar() + z_crit * se};
  }

  EffectEstimate lin = estimate_two_arm(frame, EstimatorKind::interacted);
  const double v_l_hat = frame.n() * lin.ehw_cov(0, 0);
  const Vector& c_hat = estimate.kind == EstimatorKind::unadjusted
                            ? *lin.c_hat_n
                            : *lin.c_hat_f;
  LawParams params = build_law_params_two_arm(frame, scheme, v_l_hat, c_hat);

  const double tail = (1.0 - level) / 2.0;
  Vector qs = convolution_quantiles(params, {tail, 1.0 - tail}, law_draws, rng);
  const double root_n = std::sqrt(double(frame.n()));
  return {estimate.point_scalar() - qs[1] / root_n,
          estimate.point_scalar() - qs[0] / root_n};
}

Interval plugin_inference_multi_arm(const ExperimentFrame& frame,
                                    const BalanceScheme& scheme,
                                    EstimatorKind kind,
                                    const Contrast& contrast, double level,
                                    long law_draws, RngStream& rng) {
  require_data(frame);
  if (contrast.rows() != 1)
    throw DimMismatch("plug-in interval needs a single-row contrast");

  ArmMeansFit fit = estimate_multi_arm(frame, kind);
  auto [tau, cov] = apply_contrast(fit.y_hat, fit.ehw_cov, contrast);

  ArmMeansFit lin = kind == EstimatorKind::interacted
                        ? fit
                        : estimate_multi_arm(frame, EstimatorKind::interacted);
  const double z_crit =
      quantile(DistributionId::normal(), 1.0 - (1.0 - level) / 2.0);
  if (kind == EstimatorKind::interacted) {
    double se = std::sqrt(cov(0, 0));
    return {tau[0] - z_crit * se, tau[0] + z_crit * se};
  }

  Matrix v_l_hat = double(frame.n()) * lin.ehw_cov;
  std::vector<Vector> gammas =
      lin.gamma_hats.empty() ? per_arm_slopes(frame) : lin.gamma_hats;
  LawParams params =
      build_law_params_multi_arm(frame, scheme, gammas, kind, v_l_hat);
  LawParams scalar = apply_contrast_rows(params, contrast.g);

  const double tail = (1.0 - level) / 2.0;
  Vector qs = convolution_quantiles(scalar, {tail, 1.0 - tail}, law_draws, rng);
  const double root_n = std::sqrt(double(frame.n()));
  return {tau[0] - qs[1] / root_n, tau[0] - qs[0] / root_n};
}

}  // namespace rep
