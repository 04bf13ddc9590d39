#pragma once

#include <utility>
#include <vector>

#include "rep/matrix.hpp"

namespace rep {

enum class EhwVariant { hc0, hc1, hc2, hc3 };

struct OlsFit {
  Vector coefficients;
  Vector residuals;
  Matrix classic_cov;  // RSS / (N - p) * (X'X)^{-1}
  Matrix ehw_cov;      // sandwich, HC0 by default
  double rss = 0.0;
  int n = 0;
  int p = 0;
  Matrix xtx_inv;
};

// Least squares via Householder QR. Throws RankDeficient when a diagonal
// of R collapses, TooFewRows when N <= p.
OlsFit ols_fit(const Matrix& design, const Vector& response,
               EhwVariant variant = EhwVariant::hc0);

// F-test of nested OLS fits on the same response.
// F = [(RSS0 - RSS1) / J] / [RSS1 / (N - p1)], p-value from F_{J, N - p1}.
std::pair<double, double> ols_f_test(const OlsFit& full, const OlsFit& null);

struct MleFit {
  // theta stacked by non-reference level, (intercept, slopes) per level.
  Vector theta;
  Matrix cov;             // slope block of (-N H)^{-1}
  Matrix cov_ehw;         // sandwich counterpart of cov
  double loglik_scaled = 0.0;
  bool converged = false;
  int iterations = 0;
  int q = 0;
  int j = 0;

  // Slope beta_{qj} for non-reference level q (1-based) and covariate j
  // (1-based), and the stacked slope vector in lexicographic (q, j) order.
  double beta(int level, int cov_index) const;
  Vector beta_stacked() const;
};

// Multinomial logistic MLE of labels in {1..Q} on (1, covariates), level Q
// as the reference. Newton-Raphson from the intercept-only optimum with
// step halving; convergence on gradient sup-norm < 1e-10.
// Throws MleFailure on non-convergence or divergence, RankDeficient when
// the Hessian is singular at some iterate.
MleFit mlogit_fit(const std::vector<int>& labels, const Matrix& covariates);

// Likelihood ratio statistic of the fitted model against intercepts only:
// 2N { Lbar(theta_hat) - sum_q e_q log e_q }, clamped at zero.
double mlogit_lrt(const MleFit& fit, const std::vector<int>& labels,
                  const Matrix& covariates);

// coef' cov^{-1} coef.
double wald_stat(const Vector& coef, const Matrix& cov);

// Scaled multinomial log-likelihood at an arbitrary parameter, exposed for
// tests (concavity checks).
double mlogit_loglik(const Vector& theta, const std::vector<int>& labels,
                     const Matrix& covariates);

}  // namespace rep
