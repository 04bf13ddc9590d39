#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rep/distributions.hpp"
#include "rep/errors.hpp"
#include "rep/matrix.hpp"
#include "rep/regression.hpp"
#include "rep/rng.hpp"

using namespace rep;

namespace {

Matrix design_with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    d(i, 0) = 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) d(i, j + 1) = x(i, j);
  }
  return d;
}

std::vector<int> draw_binary(int n, int n1, RngStream& rng) {
  std::vector<int> z(n, 0);
  std::fill(z.begin(), z.begin() + n1, 1);
  rng.shuffle(z);
  return z;
}

Matrix random_covariates(int n, int j, RngStream& rng) {
  Matrix x(n, j);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < j; ++k) x(i, k) = 2.0 * rng.next_double() - 1.0;
  for (int k = 0; k < j; ++k) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += x(i, k);
    m /= n;
    for (int i = 0; i < n; ++i) x(i, k) -= m;
  }
  return x;
}

double ks_distance_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  double d = 0.0;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, std::fabs(p[i] - (i + 1) / n));
    d = std::max(d, std::fabs(p[i] - i / n));
  }
  return d;
}

}  // namespace

TEST_CASE("intercept-only fit returns the mean") {
  Matrix ones(5, 1, 1.0);
  Vector y = {1.0, 4.0, 2.0, 8.0, 5.0};
  OlsFit fit = ols_fit(ones, y);
  CHECK(fit.coefficients[0] == doctest::Approx(4.0));
  CHECK(fit.rss == doctest::Approx(30.0));
}

TEST_CASE("two-group fit recovers the difference in means") {
  Matrix d(4, 2);
  Vector y = {1.0, 2.0, 3.0, 4.0};
  Vector z = {1.0, 1.0, 0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = z[i];
  }
  OlsFit fit = ols_fit(d, y);
  CHECK(fit.coefficients[1] == doctest::Approx(-2.0));  // 1.5 - 3.5
  CHECK(fit.coefficients[0] == doctest::Approx(3.5));
}

TEST_CASE("residuals are orthogonal to the design") {
  RngStream rng(41, 0);
  Matrix x = random_covariates(60, 4, rng);
  Matrix d = design_with_intercept(x);
  Vector y(60);
  for (int i = 0; i < 60; ++i) y[i] = rng.next_normal() + x(i, 0) * 2.0;
  OlsFit fit = ols_fit(d, y);
  for (std::size_t j = 0; j < d.cols(); ++j) {
    double ip = dot(d.col(j), fit.residuals);
    double scale = norm2(d.col(j)) * norm2(fit.residuals);
    CHECK(std::fabs(ip) <= 1e-8 * std::max(scale, 1.0));
  }
  double rss_direct = dot(fit.residuals, fit.residuals);
  CHECK(fit.rss == doctest::Approx(rss_direct));
}

TEST_CASE("rank deficiency and row-count guards") {
  Matrix d(5, 2);
  for (int i = 0; i < 5; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = 2.0;  // duplicate of the intercept up to scale
  }
  Vector y = {1, 2, 3, 4, 5};
  CHECK_THROWS_AS(ols_fit(d, y), RankDeficient);

  Matrix tall(2, 3, 1.0);
  Vector y2 = {1.0, 2.0};
  CHECK_THROWS_AS(ols_fit(tall, y2), TooFewRows);
}

TEST_CASE("F equals the Wald statistic divided by J") {
  RngStream rng(7, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 50 + 10 * rep;
    const int j = 3;
    Matrix x = random_covariates(n, j, rng);
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.next_double() < 0.4 ? 1.0 : 0.0;

    OlsFit full = ols_fit(design_with_intercept(x), z);
    OlsFit null = ols_fit(Matrix(n, 1, 1.0), z);
    auto [f, p] = ols_f_test(full, null);

    Vector beta(full.coefficients.begin() + 1, full.coefficients.end());
    Matrix vhat(j, j);
    for (int a = 0; a < j; ++a)
      for (int b = 0; b < j; ++b) vhat(a, b) = full.classic_cov(a + 1, b + 1);
    double w = wald_stat(beta, vhat);
    CHECK(f == doctest::Approx(w / j).epsilon(1e-10));
    CHECK(p ==
          doctest::Approx(1.0 - cdf(DistributionId::fdist(j, n - 1 - j), f)));
  }
}

TEST_CASE("F-test of a model against itself is zero") {
  Matrix d(6, 1, 1.0);
  Vector y = {1, 2, 3, 1, 2, 3};
  OlsFit fit = ols_fit(d, y);
  auto [f, p] = ols_f_test(fit, fit);
  CHECK(f == 0.0);
  CHECK(p == 1.0);
}

TEST_CASE("F-test p-values are approximately uniform under the null") {
  RngStream rng(2718, 0);
  const int n = 200, j = 3, reps = 2000;
  std::vector<double> pvals;
  pvals.reserve(reps);
  Matrix ones(n, 1, 1.0);
  for (int r = 0; r < reps; ++r) {
    Matrix x = random_covariates(n, j, rng);
    Vector z(n);
    std::vector<int> zi = draw_binary(n, 80, rng);
    for (int i = 0; i < n; ++i) z[i] = zi[i];
    OlsFit full = ols_fit(design_with_intercept(x), z);
    OlsFit null = ols_fit(ones, z);
    pvals.push_back(ols_f_test(full, null).second);
  }
  CHECK(ks_distance_uniform(pvals) < 0.05);
}

TEST_CASE("EHW equals s^2 (X'X)^{-1} when residual magnitudes are constant") {
  Matrix d(6, 2);
  for (int i = 0; i < 6; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = i < 3 ? 1.0 : 0.0;
  }
  // group means 2 and 5, residuals +-1 within both groups
  Vector y = {3.0, 1.0, 2.0, 6.0, 4.0, 5.0};
  OlsFit fit = ols_fit(d, y);
  double c = fit.residuals[0] * fit.residuals[0];
  int nonzero = 0;
  for (double e : fit.residuals)
    if (std::fabs(e * e - c) < 1e-12) ++nonzero;
  CHECK(nonzero >= 4);  // the two group-mean units have zero residual
  // use the exact algebraic form instead: meat = sum e_i^2 x x' and compare
  Matrix meat(2, 2);
  for (int i = 0; i < 6; ++i) {
    double s = fit.residuals[i] * fit.residuals[i];
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) meat(a, b) += s * d(i, a) * d(i, b);
  }
  Matrix expected = fit.xtx_inv * meat * fit.xtx_inv;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(fit.ehw_cov(a, b) == doctest::Approx(expected(a, b)).epsilon(1e-12));
}

TEST_CASE("HC0 sandwich collapses when all residuals share one magnitude") {
  // Balanced +-c residual pattern around a single mean.
  Matrix d(4, 1, 1.0);
  Vector y = {2.0, 4.0, 2.0, 4.0};
  OlsFit fit = ols_fit(d, y);
  // residuals are -1, 1, -1, 1, so meat = N^{-1} RSS X'X and
  // ehw = (RSS / N) (X'X)^{-1} exactly
  double s2 = fit.rss / fit.n;
  CHECK(fit.ehw_cov(0, 0) == doctest::Approx(s2 * fit.xtx_inv(0, 0)).epsilon(1e-14));
}

TEST_CASE("HC variants are ordered in the usual way") {
  RngStream rng(4, 0);
  Matrix x = random_covariates(40, 2, rng);
  Matrix d = design_with_intercept(x);
  Vector y(40);
  for (int i = 0; i < 40; ++i)
    y[i] = x(i, 0) + (1.0 + x(i, 1) * x(i, 1)) * rng.next_normal();
  OlsFit h0 = ols_fit(d, y, EhwVariant::hc0);
  OlsFit h1 = ols_fit(d, y, EhwVariant::hc1);
  OlsFit h3 = ols_fit(d, y, EhwVariant::hc3);
  CHECK(h1.ehw_cov(1, 1) > h0.ehw_cov(1, 1));
  CHECK(h3.ehw_cov(1, 1) > h0.ehw_cov(1, 1));
}

TEST_CASE("Frisch-Waugh-Lovell: lm(Z ~ 1+x) slope equals N/(N-1) vx^{-1} taux") {
  RngStream rng(11, 0);
  const int n = 120, n1 = 40, j = 3;
  Matrix x = random_covariates(n, j, rng);
  std::vector<int> z = draw_binary(n, n1, rng);

  Vector zv(n);
  for (int i = 0; i < n; ++i) zv[i] = z[i];
  OlsFit fit = ols_fit(design_with_intercept(x), zv);

  Vector x1(j, 0.0), x0(j, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < j; ++k) (z[i] ? x1[k] : x0[k]) += x(i, k);
  for (int k = 0; k < j; ++k) {
    x1[k] /= n1;
    x0[k] /= (n - n1);
  }
  Vector taux = x1 - x0;
  Matrix s2x(j, j);
  for (int a = 0; a < j; ++a)
    for (int b = 0; b < j; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += x(i, a) * x(i, b);
      s2x(a, b) = s / (n - 1);
    }
  double e1 = double(n1) / n, e0 = 1.0 - e1;
  Matrix vx = (1.0 / (e0 * e1)) * s2x;
  Vector expected = double(n) / (n - 1) * solve_spd(vx, taux);
  for (int k = 0; k < j; ++k)
    CHECK(fit.coefficients[k + 1] ==
          doctest::Approx(expected[k]).epsilon(1e-10));
}

TEST_CASE("intercept-only multinomial logit recovers level frequencies") {
  std::vector<int> labels = {1, 1, 1, 2, 2, 3, 3, 3, 3, 3};
  Matrix empty(10, 0);
  MleFit fit = mlogit_fit(labels, empty);
  CHECK(fit.converged);
  CHECK(fit.iterations == 0);
  double denom = 1.0;
  for (int q = 0; q < 2; ++q) denom += std::exp(fit.theta[q]);
  CHECK(std::exp(fit.theta[0]) / denom == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(std::exp(fit.theta[1]) / denom == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(1.0 / denom == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("binary logit tracks the large-sample linearization") {
  const int n = 10000, n1 = 3000, j = 3;
  int hits_beta = 0, hits_cov = 0, hits_lrt = 0;
  const int draws = 30;
  RngStream seq(314, 0);
  for (int d = 0; d < draws; ++d) {
    RngStream rng = seq.substream(d);
    Matrix x = random_covariates(n, j, rng);
    std::vector<int> zbin = draw_binary(n, n1, rng);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = zbin[i] ? 1 : 2;

    MleFit fit = mlogit_fit(labels, x);
    Vector beta = fit.beta_stacked();

    Vector x1(j, 0.0), x0(j, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < j; ++k) (zbin[i] ? x1[k] : x0[k]) += x(i, k);
    for (int k = 0; k < j; ++k) {
      x1[k] /= n1;
      x0[k] /= (n - n1);
    }
    Matrix s2x(j, j);
    for (int a = 0; a < j; ++a)
      for (int b = 0; b < j; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += x(i, a) * x(i, b);
        s2x(a, b) = s / (n - 1);
      }
    Vector target = solve_spd(s2x, x1 - x0);
    double err = 0.0;
    for (int k = 0; k < j; ++k)
      err += (beta[k] - target[k]) * (beta[k] - target[k]);
    if (std::sqrt(double(n) * err) < 0.05) ++hits_beta;

    double e1 = double(n1) / n, e0 = 1.0 - e1;
    Matrix limit = (1.0 / (e0 * e1)) * invert_spd(s2x);
    double num = 0.0, den = 0.0;
    for (int a = 0; a < j; ++a)
      for (int b = 0; b < j; ++b) {
        double diff = n * fit.cov(a, b) - limit(a, b);
        num += diff * diff;
        den += limit(a, b) * limit(a, b);
      }
    if (std::sqrt(num / den) < 0.05) ++hits_cov;

    double lrt = mlogit_lrt(fit, labels, x);
    double wald = wald_stat(beta, fit.cov);
    if (std::fabs(lrt - wald) < 0.05) ++hits_lrt;
  }
  CHECK(hits_beta >= 27);
  CHECK(hits_cov >= 27);
  CHECK(hits_lrt >= 27);
}

TEST_CASE("LRT is zero for the intercept-only model") {
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(1 + (i % 3));
  Matrix empty(30, 0);
  MleFit fit = mlogit_fit(labels, empty);
  CHECK(mlogit_lrt(fit, labels, empty) == doctest::Approx(0.0));
}

TEST_CASE("multinomial logit log-likelihood is concave along segments") {
  RngStream rng(8, 0);
  const int n = 200, j = 2;
  Matrix x = random_covariates(n, j, rng);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i)
    labels[i] = 1 + static_cast<int>(rng.next_below(3));
  const int d = (j + 1) * 2;
  for (int rep = 0; rep < 25; ++rep) {
    Vector a(d), b(d);
    for (int k = 0; k < d; ++k) {
      a[k] = rng.next_normal();
      b[k] = rng.next_normal();
    }
    Vector mid(d);
    for (int k = 0; k < d; ++k) mid[k] = 0.5 * (a[k] + b[k]);
    double la = mlogit_loglik(a, labels, x);
    double lb = mlogit_loglik(b, labels, x);
    double lm = mlogit_loglik(mid, labels, x);
    CHECK(lm >= std::min(la, lb) - 1e-12);
  }
}

TEST_CASE("LRT null distribution is approximately chi-square") {
  const int n = 600, j = 2, reps = 500;
  std::vector<double> pvals;
  RngStream seq(77, 0);
  for (int r = 0; r < reps; ++r) {
    RngStream rng = seq.substream(r);
    Matrix x = random_covariates(n, j, rng);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = 1 + (i % 3);
    rng.shuffle(labels);
    MleFit fit = mlogit_fit(labels, x);
    double lrt = mlogit_lrt(fit, labels, x);
    pvals.push_back(1.0 - cdf(DistributionId::chi2(j * 2), lrt));
  }
  CHECK(ks_distance_uniform(pvals) < 0.08);
}

TEST_CASE("wald_stat hand values") {
  CHECK(wald_stat({0.0, 0.0}, Matrix::identity(2)) == doctest::Approx(0.0));
  CHECK(wald_stat({1.0, 1.0}, Matrix::identity(2)) == doctest::Approx(2.0));
  CHECK(wald_stat({1.0, 2.0}, Matrix::diag({1.0, 4.0})) ==
        doctest::Approx(2.0));
}

TEST_CASE("separation raises MleFailure") {
  const int n = 40;
  Matrix x(n, 1);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    double v = (i < n / 2) ? -1.0 - 0.01 * i : 1.0 + 0.01 * i;
    x(i, 0) = v;
    labels[i] = (i < n / 2) ? 2 : 1;
  }
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += x(i, 0);
  for (int i = 0; i < n; ++i) x(i, 0) -= m / n;
  CHECK_THROWS_AS(mlogit_fit(labels, x), MleFailure);
}
