#include "rep/asymlaw.hpp"

#include <algorithm>
#include <cmath>

#include "rep/distributions.hpp"
#include "rep/errors.hpp"

namespace rep {

ConstrainedLaw make_constrained_law(Matrix cov) {
  ConstrainedLaw law;
  law.factor = cholesky(cov);
  law.cov = std::move(cov);
  return law;
}

namespace {

struct ConstraintChecker {
  const ConstrainedLaw* law;
  Matrix ellipsoid_metric_inv;

  explicit ConstraintChecker(const ConstrainedLaw& l) : law(&l) {
    if (law->ellipsoid)
      ellipsoid_metric_inv = invert_spd(law->ellipsoid->metric);
  }

  bool ok(const Vector& z) const {
    if (law->box_limits) {
      const Vector& a = *law->box_limits;
      for (std::size_t k = 0; k < z.size(); ++k)
        if (std::fabs(z[k]) > a[k]) return false;
    }
    if (law->ellipsoid) {
      if (quad_form(z, ellipsoid_metric_inv, z) > law->ellipsoid->radius)
        return false;
    }
    if (law->grouped) {
      const auto& g = *law->grouped;
      const std::size_t q = g.weights.size();
      const std::size_t j = g.bounds.size();
      for (std::size_t jj = 0; jj < j; ++jj) {
        double s = 0.0;
        for (std::size_t qq = 0; qq < q; ++qq) {
          double v = z[qq * j + jj];
          s += g.weights[qq] * v * v;
        }
        if (s > g.bounds[jj]) return false;
      }
    }
    return true;
  }
};

}  // namespace

Matrix sample_constrained(const ConstrainedLaw& law, long n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("need at least one draw");
  if (!law.has_constraint() && law.factor.empty())
    throw std::invalid_argument("law has no covariance factor");
  const std::size_t d = law.dim();
  const std::size_t r = law.factor.cols();
  ConstraintChecker checker(law);

  Matrix out(n, d);
  Vector eta(r), z(d);
  long accepted = 0;
  long proposed = 0;
  while (accepted < n) {
    for (std::size_t k = 0; k < r; ++k) eta[k] = rng.next_normal();
    for (std::size_t i = 0; i < d; ++i) {
      const double* row = law.factor.row_ptr(i);
      double acc = 0.0;
      for (std::size_t k = 0; k < r; ++k) acc += row[k] * eta[k];
      z[i] = acc;
    }
    ++proposed;
    if (checker.ok(z)) {
      for (std::size_t i = 0; i < d; ++i) out(accepted, i) = z[i];
      ++accepted;
    }
    if (proposed % 100000 == 0 &&
        static_cast<double>(accepted) / proposed < 1e-4)
      throw AcceptanceTooLow(
          "constrained-law acceptance below 1e-4; relax the thresholds");
  }
  return out;
}

namespace {

Vector marginal_box(const BalanceScheme& scheme, int j, int q) {
  auto alphas = scheme.marginal_alphas(j, q);
  Vector a(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k)
    a[k] = quantile(DistributionId::normal(), 1.0 - alphas[k] / 2.0);
  return a;
}

}  // namespace

LawParams build_law_params_two_arm(const ExperimentFrame& frame,
                                   const BalanceScheme& scheme,
                                   double v_l_hat, const Vector& c_hat) {
  const int j = frame.j();
  const int q = frame.q();
  scheme.validate(j, q);
  if (q != 2) throw IncompatibleScheme("two-arm law needs Q = 2");
  if (static_cast<int>(c_hat.size()) != j)
    throw DimMismatch("c_hat length != J");

  const Matrix vx = (1.0 / (frame.e0() * frame.e1())) * frame.s2x();

  LawParams params;
  params.v_l = Matrix{{v_l_hat}};

  const bool joint_style =
      scheme.model == Model::rem || scheme.rule == Rule::joint;
  if (joint_style) {
    // All joint rules share the ReM limit: the isotropic a0-ellipsoid law
    // mapped through c' vx^{-1/2}.
    params.law = make_constrained_law(Matrix::identity(j));
    params.law.ellipsoid = ConstrainedLaw::Ellipsoid{
        Matrix::identity(j),
        quantile(DistributionId::chi2(j), 1.0 - scheme.alpha_joint)};
    Matrix vx_inv_half = sqrt_spd(invert_spd(vx));
    Matrix map(1, j);
    Vector row = vx_inv_half * c_hat;  // symmetric root, so c' M = (M c)'
    for (int k = 0; k < j; ++k) map(0, k) = row[k];
    params.map = map;
    return params;
  }

  Vector a = marginal_box(scheme, j, q);
  Matrix map(1, j);
  Matrix law_cov;
  if (scheme.model == Model::t) {
    auto [sigma, corr] = sigma_and_corr(vx);
    law_cov = corr;  // D(v_x)
    Vector row = solve_spd(vx, c_hat);  // vx^{-1} c
    for (int k = 0; k < j; ++k) map(0, k) = row[k] * sigma(k, k);
  } else {
    // lm and logit marginal criteria share the D(vx^{-1}) law.
    Matrix vx_inv = invert_spd(vx);
    auto [sigma, corr] = sigma_and_corr(vx_inv);
    law_cov = corr;
    for (int k = 0; k < j; ++k) map(0, k) = c_hat[k] * sigma(k, k);
  }
  params.law = make_constrained_law(law_cov);
  params.law.box_limits = a;
  if (scheme.rule == Rule::consensus)
    params.law.ellipsoid = ConstrainedLaw::Ellipsoid{
        params.law.cov,
        quantile(DistributionId::chi2(j), 1.0 - scheme.alpha_joint)};
  params.map = map;
  return params;
}

Matrix kappa_matrix(const ExperimentFrame& frame) {
  const int q = frame.q(), j = frame.j();
  Matrix head(q, q - 1);
  for (int k = 0; k < q - 1; ++k) head(k, k) = 1.0;
  for (int k = 0; k < q - 1; ++k)
    head(q - 1, k) = -frame.e(k + 1) / frame.e(q);
  return kron(head, Matrix::identity(j));
}

Matrix big_v_x(const ExperimentFrame& frame) {
  const int q = frame.q();
  Matrix head(q, q);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      head(a, b) = (a == b ? 1.0 / frame.e(a + 1) : 0.0) - 1.0;
  return kron(head, frame.s2x());
}

Matrix v_x_plus(const ExperimentFrame& frame) {
  const int q = frame.q();
  Matrix head(q - 1, q - 1);
  for (int a = 0; a < q - 1; ++a)
    for (int b = 0; b < q - 1; ++b)
      head(a, b) = (a == b ? 1.0 / frame.e(a + 1) : 0.0) - 1.0;
  return kron(head, frame.s2x());
}

namespace {

Matrix phi_matrix(const ExperimentFrame& frame) {
  const int q = frame.q();
  Matrix phi(q - 1, q - 1);
  for (int a = 0; a < q - 1; ++a)
    for (int b = 0; b < q - 1; ++b) {
      double ea = frame.e(a + 1), eb = frame.e(b + 1);
      phi(a, b) = (a == b ? ea : 0.0) - ea * eb;
    }
  return phi;
}

}  // namespace

Matrix psi_matrix(const ExperimentFrame& frame) {
  const int q = frame.q();
  Matrix r_plus(q - 1, q - 1);
  for (int a = 0; a < q - 1; ++a) r_plus(a, a) = frame.e(a + 1);
  Matrix head = invert_spd(phi_matrix(frame)) * r_plus;
  return kron(head, invert_spd(frame.s2x()));
}

// Psi is a Kronecker product of invertible (not symmetric) factors, so its
// inverse has the closed form (R+^{-1} Phi) (x) S2x.
Matrix psi_inverse(const ExperimentFrame& frame) {
  const int q = frame.q();
  Matrix r_inv(q - 1, q - 1);
  for (int a = 0; a < q - 1; ++a) r_inv(a, a) = 1.0 / frame.e(a + 1);
  Matrix head = r_inv * phi_matrix(frame);
  return kron(head, frame.s2x());
}

Matrix v_psi(const ExperimentFrame& frame) {
  return kron(invert_spd(phi_matrix(frame)), invert_spd(frame.s2x()));
}

Matrix gamma_map(const std::vector<Vector>& gamma_q, EstimatorKind kind,
                 const Vector& level_shares) {
  const int q = static_cast<int>(gamma_q.size());
  const int j = static_cast<int>(gamma_q.front().size());
  Matrix gamma(q, q * j);
  if (kind == EstimatorKind::interacted) return gamma;  // zero map
  Vector gamma_f(j, 0.0);
  if (kind == EstimatorKind::additive) {
    for (int level = 0; level < q; ++level)
      for (int k = 0; k < j; ++k)
        gamma_f[k] += level_shares[level] * gamma_q[level][k];
  }
  for (int level = 0; level < q; ++level)
    for (int k = 0; k < j; ++k)
      gamma(level, level * j + k) =
          gamma_q[level][k] -
          (kind == EstimatorKind::additive ? gamma_f[k] : 0.0);
  return gamma;
}

LawParams build_law_params_multi_arm(const ExperimentFrame& frame,
                                     const BalanceScheme& scheme,
                                     const std::vector<Vector>& gamma_q,
                                     EstimatorKind kind,
                                     const Matrix& v_l_hat) {
  const int j = frame.j(), q = frame.q();
  scheme.validate(j, q);
  if (static_cast<int>(gamma_q.size()) != q)
    throw DimMismatch("need one slope vector per level");
  if (scheme.model != Model::f && scheme.model != Model::mlogit)
    throw IncompatibleScheme("multi-arm laws cover the f and mlogit schemes");

  Vector shares(q);
  for (int level = 1; level <= q; ++level) shares[level - 1] = frame.e(level);
  Matrix gamma = gamma_map(gamma_q, kind, shares);

  LawParams params;
  params.v_l = v_l_hat;

  if (scheme.model == Model::f) {
    // eps_f ~ N(0, V_x) is singular; sample it as kappa eps_plus.
    Matrix kap = kappa_matrix(frame);
    ConstrainedLaw law;
    law.cov = big_v_x(frame);
    law.factor = kap * cholesky(v_x_plus(frame));
    ConstrainedLaw::GroupedQuadratic grouped;
    grouped.weights = shares;
    auto alphas = scheme.marginal_alphas(j, q);
    grouped.bounds.resize(j);
    for (int k = 0; k < j; ++k)
      grouped.bounds[k] =
          quantile(DistributionId::chi2(q - 1), 1.0 - alphas[k]) *
          frame.s2x()(k, k);
    law.grouped = grouped;
    params.law = std::move(law);
    params.map = gamma;
    return params;
  }

  // mlogit schemes live on the non-reference block.
  Matrix gamma_prime = gamma * kappa_matrix(frame);
  const int m = j * (q - 1);
  if (scheme.rule == Rule::joint) {
    params.law = make_constrained_law(Matrix::identity(m));
    params.law.ellipsoid = ConstrainedLaw::Ellipsoid{
        Matrix::identity(m),
        quantile(DistributionId::chi2(m), 1.0 - scheme.alpha_joint)};
    params.map = gamma_prime * sqrt_spd(v_x_plus(frame));
    return params;
  }

  Matrix vps = v_psi(frame);
  auto [sigma, corr] = sigma_and_corr(vps);
  params.law = make_constrained_law(corr);  // D(V_Psi)
  params.law.box_limits = marginal_box(scheme, j, q);
  if (scheme.rule == Rule::consensus)
    params.law.ellipsoid = ConstrainedLaw::Ellipsoid{
        params.law.cov,
        quantile(DistributionId::chi2(m), 1.0 - scheme.alpha_joint)};
  params.map = gamma_prime * psi_inverse(frame) * sigma;
  return params;
}

LawParams apply_contrast_rows(const LawParams& params, const Matrix& g) {
  LawParams out;
  out.v_l = g * params.v_l * g.transposed();
  out.v_l.symmetrize();
  out.map = g * params.map;
  out.law = params.law;
  return out;
}

Vector convolution_quantiles(const LawParams& params, const Vector& probs,
                             long n_draws, RngStream& rng) {
  if (params.v_l.rows() != 1)
    throw DimMismatch("convolution quantiles need a scalar law");
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0))
      throw ProbabilityOutOfRange("quantile probabilities must be in (0,1)");

  const double sd = std::sqrt(std::max(params.v_l(0, 0), 0.0));
  Matrix t_draws = sample_constrained(params.law, n_draws, rng);
  Vector values(n_draws);
  const std::size_t d = params.law.dim();
  for (long i = 0; i < n_draws; ++i) {
    double acc = sd * rng.next_normal();
    const double* mrow = params.map.row_ptr(0);
    const double* trow = t_draws.row_ptr(i);
    for (std::size_t k = 0; k < d; ++k) acc += mrow[k] * trow[k];
    values[i] = acc;
  }
  std::sort(values.begin(), values.end());
  Vector out(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    double idx = probs[k] * (n_draws - 1);
    long lo = static_cast<long>(idx);
    long hi = std::min(lo + 1, n_draws - 1);
    double w = idx - lo;
    out[k] = (1.0 - w) * values[lo] + w * values[hi];
  }
  return out;
}

}  // namespace rep
