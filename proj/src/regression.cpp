#include "rep/regression.hpp"

#include <algorithm>
#include <cmath>

#include "rep/distributions.hpp"
#include "rep/errors.hpp"

namespace rep {

namespace {

// In-place Householder QR of a working copy of the design; returns R in the
// top p x p block and the rotated response alongside.
struct QrResult {
  Matrix r;        // p x p upper triangular
  Vector qty;      // first p entries of Q'y
  double tail_ss;  // squared norm of the remaining entries of Q'y
};

QrResult householder_qr(Matrix a, Vector y) {
  const std::size_t n = a.rows();
  const std::size_t p = a.cols();
  double max_col_norm = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a(i, j) * a(i, j);
    max_col_norm = std::max(max_col_norm, std::sqrt(s));
  }
  const double tol = 1e-12 * std::max(max_col_norm, 1.0);

  for (std::size_t k = 0; k < p; ++k) {
    double sigma = 0.0;
    for (std::size_t i = k; i < n; ++i) sigma += a(i, k) * a(i, k);
    double norm = std::sqrt(sigma);
    if (norm <= tol) throw RankDeficient("design matrix is rank deficient");
    double alpha = a(k, k) > 0.0 ? -norm : norm;
    // Householder vector v stored in column k below the diagonal; the head
    // component v0 lives in a local because a(k, k) now holds alpha.
    double v0 = a(k, k) - alpha;
    a(k, k) = alpha;
    double vtv = v0 * v0;
    for (std::size_t i = k + 1; i < n; ++i) vtv += a(i, k) * a(i, k);
    if (vtv <= 0.0) continue;
    for (std::size_t j = k + 1; j < p; ++j) {
      double proj = v0 * a(k, j);
      for (std::size_t i = k + 1; i < n; ++i) proj += a(i, k) * a(i, j);
      proj *= 2.0 / vtv;
      a(k, j) -= proj * v0;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= proj * a(i, k);
    }
    double proj = v0 * y[k];
    for (std::size_t i = k + 1; i < n; ++i) proj += a(i, k) * y[i];
    proj *= 2.0 / vtv;
    y[k] -= proj * v0;
    for (std::size_t i = k + 1; i < n; ++i) y[i] -= proj * a(i, k);
  }

  QrResult out;
  out.r = Matrix(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) out.r(i, j) = a(i, j);
  out.qty.assign(y.begin(), y.begin() + p);
  out.tail_ss = 0.0;
  for (std::size_t i = p; i < n; ++i) out.tail_ss += y[i] * y[i];
  return out;
}

Vector back_substitute(const Matrix& r, const Vector& b) {
  const std::size_t p = r.rows();
  Vector x(p);
  for (std::size_t ii = p; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < p; ++j) s -= r(ii, j) * x[j];
    x[ii] = s / r(ii, ii);
  }
  return x;
}

Matrix r_inverse(const Matrix& r) {
  const std::size_t p = r.rows();
  Matrix inv(p, p);
  Vector e(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    e[j] = 1.0;
    Vector x = back_substitute(r, e);
    for (std::size_t i = 0; i < p; ++i) inv(i, j) = x[i];
    e[j] = 0.0;
  }
  return inv;
}

}  // namespace

OlsFit ols_fit(const Matrix& design, const Vector& response,
               EhwVariant variant) {
  const int n = static_cast<int>(design.rows());
  const int p = static_cast<int>(design.cols());
  if (static_cast<int>(response.size()) != n)
    throw DimMismatch("response length != design rows");
  if (n <= p) throw TooFewRows("need more rows than regressors");

  QrResult qr = householder_qr(design, response);
  OlsFit fit;
  fit.n = n;
  fit.p = p;
  fit.coefficients = back_substitute(qr.r, qr.qty);

  fit.residuals.resize(n);
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    double pred = 0.0;
    const double* row = design.row_ptr(i);
    for (int j = 0; j < p; ++j) pred += row[j] * fit.coefficients[j];
    fit.residuals[i] = response[i] - pred;
    rss += fit.residuals[i] * fit.residuals[i];
  }
  fit.rss = rss;

  Matrix rinv = r_inverse(qr.r);
  fit.xtx_inv = rinv * rinv.transposed();
  fit.xtx_inv.symmetrize();
  fit.classic_cov = (rss / (n - p)) * fit.xtx_inv;

  // Sandwich covariance (X'X)^{-1} X' diag(w_i e_i^2) X (X'X)^{-1}.
  Vector w(n, 1.0);
  if (variant != EhwVariant::hc0) {
    for (int i = 0; i < n; ++i) {
      if (variant == EhwVariant::hc1) {
        w[i] = double(n) / (n - p);
      } else {
        double h = quad_form(design.row(i), fit.xtx_inv, design.row(i));
        double denom = std::max(1.0 - h, 1e-12);
        w[i] = variant == EhwVariant::hc2 ? 1.0 / denom : 1.0 / (denom * denom);
      }
    }
  }
  Matrix meat(p, p);
  for (int i = 0; i < n; ++i) {
    const double s = w[i] * fit.residuals[i] * fit.residuals[i];
    if (s == 0.0) continue;
    const double* row = design.row_ptr(i);
    for (int a = 0; a < p; ++a)
      for (int b = a; b < p; ++b) meat(a, b) += s * row[a] * row[b];
  }
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < a; ++b) meat(a, b) = meat(b, a);
  fit.ehw_cov = fit.xtx_inv * meat * fit.xtx_inv;
  fit.ehw_cov.symmetrize();
  return fit;
}

std::pair<double, double> ols_f_test(const OlsFit& full, const OlsFit& null) {
  if (full.n != null.n) throw NotNested("fits are on different samples");
  const int j = full.p - null.p;
  if (j < 0) throw NotNested("full model must not drop regressors");
  if (j == 0) {
    if (std::fabs(full.rss - null.rss) > 1e-10 * std::max(full.rss, 1.0))
      throw NotNested("equal-size models with different RSS");
    return {0.0, 1.0};
  }
  if (null.rss < full.rss - 1e-10)
    throw NotNested("null RSS below full RSS; models not nested");
  double num = std::max(null.rss - full.rss, 0.0) / j;
  double den = full.rss / (full.n - full.p);
  double f = den > 0.0 ? num / den : 0.0;
  double p = 1.0 - cdf(DistributionId::fdist(j, full.n - full.p), f);
  return {f, p};
}

namespace {

struct MlogitWork {
  int n = 0, j = 0, q = 0, d = 0;  // d = (J+1)(Q-1)
  const std::vector<int>* labels = nullptr;
  const Matrix* x = nullptr;

  // eta_q = theta_q . (1, x_i); fills probs[0..Q-1] with pi_q(x_i).
  void probs(const Vector& theta, int i, Vector& pi) const {
    const int jp1 = j + 1;
    double max_eta = 0.0;  // reference level has eta = 0
    for (int q2 = 0; q2 < q - 1; ++q2) {
      double eta = theta[q2 * jp1];
      const double* row = j > 0 ? x->row_ptr(i) : nullptr;
      for (int k = 0; k < j; ++k) eta += theta[q2 * jp1 + 1 + k] * row[k];
      pi[q2] = eta;
      max_eta = std::max(max_eta, eta);
    }
    double denom = std::exp(-max_eta);
    for (int q2 = 0; q2 < q - 1; ++q2) {
      pi[q2] = std::exp(pi[q2] - max_eta);
      denom += pi[q2];
    }
    pi[q - 1] = std::exp(-max_eta);
    for (int q2 = 0; q2 < q; ++q2) pi[q2] /= denom;
  }

  double loglik(const Vector& theta) const {
    Vector pi(q);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      probs(theta, i, pi);
      ll += std::log(std::max(pi[(*labels)[i] - 1], 1e-300));
    }
    return ll / n;
  }

  void score_and_hessian(const Vector& theta, Vector& u, Matrix& h) const {
    const int jp1 = j + 1;
    u.assign(d, 0.0);
    h = Matrix(d, d);
    Vector pi(q);
    Vector xt(jp1);
    for (int i = 0; i < n; ++i) {
      probs(theta, i, pi);
      xt[0] = 1.0;
      for (int k = 0; k < j; ++k) xt[1 + k] = (*x)(i, k);
      const int zi = (*labels)[i];
      for (int q2 = 0; q2 < q - 1; ++q2) {
        const double resid = (zi == q2 + 1 ? 1.0 : 0.0) - pi[q2];
        for (int a = 0; a < jp1; ++a) u[q2 * jp1 + a] += resid * xt[a];
      }
      for (int q2 = 0; q2 < q - 1; ++q2) {
        for (int q3 = q2; q3 < q - 1; ++q3) {
          const double wgt =
              pi[q2] * (pi[q3] - (q2 == q3 ? 1.0 : 0.0));
          if (wgt == 0.0) continue;
          for (int a = 0; a < jp1; ++a)
            for (int b = 0; b < jp1; ++b)
              h(q2 * jp1 + a, q3 * jp1 + b) += wgt * xt[a] * xt[b];
        }
      }
    }
    for (double& v : u) v /= n;
    h *= 1.0 / n;
    // mirror the block upper triangle
    for (int q2 = 0; q2 < q - 1; ++q2)
      for (int q3 = 0; q3 < q2; ++q3)
        for (int a = 0; a < jp1; ++a)
          for (int b = 0; b < jp1; ++b)
            h(q2 * jp1 + a, q3 * jp1 + b) = h(q3 * jp1 + b, q2 * jp1 + a);
  }

  // Outer-product "meat" of per-unit scores at theta.
  Matrix score_outer(const Vector& theta) const {
    const int jp1 = j + 1;
    Matrix b(d, d);
    Vector pi(q);
    Vector s(d);
    Vector xt(jp1);
    for (int i = 0; i < n; ++i) {
      probs(theta, i, pi);
      xt[0] = 1.0;
      for (int k = 0; k < j; ++k) xt[1 + k] = (*x)(i, k);
      const int zi = (*labels)[i];
      for (int q2 = 0; q2 < q - 1; ++q2) {
        const double resid = (zi == q2 + 1 ? 1.0 : 0.0) - pi[q2];
        for (int a = 0; a < jp1; ++a) s[q2 * jp1 + a] = resid * xt[a];
      }
      for (int a = 0; a < d; ++a)
        for (int c = a; c < d; ++c) b(a, c) += s[a] * s[c];
    }
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < a; ++c) b(a, c) = b(c, a);
    b *= 1.0 / n;
    return b;
  }
};

Matrix drop_intercept_rows_cols(const Matrix& full, int q, int j) {
  const int jp1 = j + 1;
  Matrix out(j * (q - 1), j * (q - 1));
  for (int q2 = 0; q2 < q - 1; ++q2)
    for (int a = 0; a < j; ++a)
      for (int q3 = 0; q3 < q - 1; ++q3)
        for (int b = 0; b < j; ++b)
          out(q2 * j + a, q3 * j + b) =
              full(q2 * jp1 + 1 + a, q3 * jp1 + 1 + b);
  return out;
}

}  // namespace

double MleFit::beta(int level, int cov_index) const {
  return theta[(level - 1) * (j + 1) + cov_index];
}

Vector MleFit::beta_stacked() const {
  Vector out;
  out.reserve(static_cast<std::size_t>(j) * (q - 1));
  for (int q2 = 1; q2 < q; ++q2)
    for (int k = 1; k <= j; ++k) out.push_back(beta(q2, k));
  return out;
}

double mlogit_loglik(const Vector& theta, const std::vector<int>& labels,
                     const Matrix& covariates) {
  MlogitWork w;
  w.n = static_cast<int>(labels.size());
  w.j = static_cast<int>(covariates.cols());
  w.q = *std::max_element(labels.begin(), labels.end());
  w.d = (w.j + 1) * (w.q - 1);
  w.labels = &labels;
  w.x = &covariates;
  return w.loglik(theta);
}

MleFit mlogit_fit(const std::vector<int>& labels, const Matrix& covariates) {
  const int n = static_cast<int>(labels.size());
  const int j = static_cast<int>(covariates.cols());
  if (j > 0 && static_cast<int>(covariates.rows()) != n)
    throw DimMismatch("labels and covariates disagree on N");
  int q = 0;
  for (int z : labels) q = std::max(q, z);
  if (q < 2) throw std::invalid_argument("need at least two observed levels");
  std::vector<int> counts(q, 0);
  for (int z : labels) {
    if (z < 1) throw std::invalid_argument("labels must be in 1..Q");
    ++counts[z - 1];
  }
  for (int c : counts)
    if (c < 2)
      throw std::invalid_argument("every level must appear at least twice");

  MlogitWork w;
  w.n = n;
  w.j = j;
  w.q = q;
  w.d = (j + 1) * (q - 1);
  w.labels = &labels;
  w.x = &covariates;

  // Start at the intercept-only optimum: log(e_q / e_Q), zero slopes.
  Vector theta(w.d, 0.0);
  const double log_eq = std::log(double(counts[q - 1]) / n);
  for (int q2 = 0; q2 < q - 1; ++q2)
    theta[q2 * (j + 1)] = std::log(double(counts[q2]) / n) - log_eq;

  double ll = w.loglik(theta);
  Vector u;
  Matrix h;
  const double grad_tol = 1e-10;
  const int max_iter = 100;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    w.score_and_hessian(theta, u, h);
    double sup = 0.0;
    for (double v : u) sup = std::max(sup, std::fabs(v));
    if (sup < grad_tol) break;

    Matrix neg_h = -1.0 * h;
    Vector step;
    try {
      step = solve_spd(neg_h, u);
    } catch (const NotPositiveDefinite&) {
      throw RankDeficient("singular Hessian in multinomial logit fit");
    }

    double lambda = 1.0;
    Vector candidate;
    double ll_new = ll;
    bool improved = false;
    // Near the optimum the true gain per step drops below the rounding
    // noise of the scaled log-likelihood, so accept ties up to that noise.
    const double round_tol = 1e-13 * (std::fabs(ll) + 1.0);
    for (int halving = 0; halving <= 30; ++halving) {
      candidate = theta;
      for (int k = 0; k < w.d; ++k) candidate[k] += lambda * step[k];
      ll_new = w.loglik(candidate);
      if (ll_new >= ll - round_tol) {
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved)
      throw MleFailure("multinomial logit step halving exhausted", iter);
    theta = candidate;
    ll = ll_new;
    double sup_theta = 0.0;
    for (double v : theta) sup_theta = std::max(sup_theta, std::fabs(v));
    if (sup_theta > 1e4)
      throw MleFailure("multinomial logit estimates diverged (separation?)",
                       iter);
  }
  w.score_and_hessian(theta, u, h);
  double sup = 0.0;
  for (double v : u) sup = std::max(sup, std::fabs(v));
  if (sup >= grad_tol)
    throw MleFailure("multinomial logit did not converge", iter);
  // A perfectly separating fit drives every pi_{Z_i} to 1 and the scaled
  // log-likelihood to 0, zeroing the score at an absurd parameter. Treat
  // that as separation, not convergence.
  if (ll > -1e-6)
    throw MleFailure("multinomial logit separation (perfect fit)", iter);

  MleFit fit;
  fit.theta = theta;
  fit.loglik_scaled = ll;
  fit.converged = true;
  fit.iterations = iter;
  fit.q = q;
  fit.j = j;

  Matrix neg_h = -1.0 * h;
  Matrix full_inv = invert_spd(neg_h) * (1.0 / n);  // (-N H)^{-1}
  if (j > 0) {
    fit.cov = drop_intercept_rows_cols(full_inv, q, j);
    Matrix b = w.score_outer(theta);
    Matrix a_inv = invert_spd(neg_h);
    Matrix sandwich = a_inv * b * a_inv * (1.0 / n);
    fit.cov_ehw = drop_intercept_rows_cols(sandwich, q, j);
  }
  return fit;
}

double mlogit_lrt(const MleFit& fit, const std::vector<int>& labels,
                  const Matrix& covariates) {
  (void)covariates;
  if (!fit.converged) throw MleFailure("LRT needs a converged fit", 0);
  const int n = static_cast<int>(labels.size());
  std::vector<int> counts(fit.q, 0);
  for (int z : labels) ++counts[z - 1];
  double ll_null = 0.0;
  for (int c : counts) {
    double e = double(c) / n;
    ll_null += e * std::log(e);
  }
  double lambda = 2.0 * n * (fit.loglik_scaled - ll_null);
  if (lambda < -1e-8)
    throw MleFailure("LRT statistic is materially negative", fit.iterations);
  return std::max(lambda, 0.0);
}

double wald_stat(const Vector& coef, const Matrix& cov) {
  if (coef.empty()) return 0.0;
  return mahalanobis(coef, cov);
}

}  // namespace rep
