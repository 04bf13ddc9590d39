#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rep/errors.hpp"
#include "rep/estimate.hpp"
#include "rep/population.hpp"
#include "rep/regression.hpp"
#include "test_helpers.hpp"

using namespace rep;
using namespace rep::testing;

namespace {

ExperimentFrame frame_with_outcomes(int n, int n1, int j, RngStream& rng,
                                    double noise = 1.0) {
  ExperimentFrame frame = randomized_two_arm(n, n1, j, rng);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    double g = 0.0;
    for (int k = 0; k < j; ++k) g += (k + 1) * frame.x()(i, k);
    double z = frame.assignment()[i] == 1 ? 1.0 : 0.0;
    y[i] = 1.0 + 2.0 * z + g + 0.5 * z * g + noise * rng.next_normal();
  }
  frame.set_outcomes(y);
  return frame;
}

}  // namespace

TEST_CASE("difference in means on a toy dataset") {
  Matrix x(4, 1);
  x(0, 0) = 0.3;
  x(1, 0) = -0.2;
  x(2, 0) = 0.1;
  x(3, 0) = 0.6;
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 2, 2);
  frame.set_assignment({1, 1, 0, 0});
  frame.set_outcomes({1.0, 2.0, 3.0, 4.0});
  EffectEstimate est = estimate_two_arm(frame, EstimatorKind::unadjusted);
  CHECK(est.point_scalar() == doctest::Approx(-2.0));
}

TEST_CASE("with no covariate adjustment all kinds need J = 0 to coincide") {
  // J = 0 frames are not representable (S2x must be PD), so check the
  // algebraic equivalent: decomposition with zero gamma contribution.
  RngStream rng(20, 0);
  ExperimentFrame frame = frame_with_outcomes(60, 20, 1, rng, 0.0);
  EffectEstimate n_est = estimate_two_arm(frame, EstimatorKind::unadjusted);
  EffectEstimate f_est = estimate_two_arm(frame, EstimatorKind::additive);
  EffectEstimate l_est = estimate_two_arm(frame, EstimatorKind::interacted);

  // tau_N - taux' gamma_* reproduces tau_F and tau_L exactly
  Vector taux = frame.taux_hat();
  const Vector& g1 = l_est.gamma_hats[0];
  const Vector& g0 = l_est.gamma_hats[1];
  double gamma_l = frame.e0() * g1[0] + frame.e1() * g0[0];
  CHECK(l_est.point_scalar() ==
        doctest::Approx(n_est.point_scalar() - taux[0] * gamma_l)
            .epsilon(1e-9));
  (void)f_est;
}

TEST_CASE("decomposition identity for the additive estimator") {
  RngStream rng(21, 0);
  for (int rep = 0; rep < 5; ++rep) {
    ExperimentFrame frame = frame_with_outcomes(120, 50, 3, rng);
    EffectEstimate n_est = estimate_two_arm(frame, EstimatorKind::unadjusted);
    EffectEstimate f_est = estimate_two_arm(frame, EstimatorKind::additive);

    // gamma_F: slope block of lm(Y ~ 1 + Z + x)
    Matrix d(frame.n(), 2 + 3);
    for (int i = 0; i < frame.n(); ++i) {
      d(i, 0) = 1.0;
      d(i, 1) = frame.assignment()[i] == 1 ? 1.0 : 0.0;
      for (int k = 0; k < 3; ++k) d(i, 2 + k) = frame.x()(i, k);
    }
    OlsFit fit = ols_fit(d, frame.outcomes());
    Vector gamma_f(fit.coefficients.begin() + 2, fit.coefficients.end());
    double adj = dot(frame.taux_hat(), gamma_f);
    CHECK(f_est.point_scalar() ==
          doctest::Approx(n_est.point_scalar() - adj).epsilon(1e-9));
  }
}

TEST_CASE("interacted decomposition with gamma_L = e0 g1 + e1 g0") {
  RngStream rng(22, 0);
  for (int rep = 0; rep < 5; ++rep) {
    ExperimentFrame frame = frame_with_outcomes(100, 30, 2, rng);
    EffectEstimate n_est = estimate_two_arm(frame, EstimatorKind::unadjusted);
    EffectEstimate l_est = estimate_two_arm(frame, EstimatorKind::interacted);
    Vector gamma_l(2);
    for (int k = 0; k < 2; ++k)
      gamma_l[k] = frame.e0() * l_est.gamma_hats[0][k] +
                   frame.e1() * l_est.gamma_hats[1][k];
    double adj = dot(frame.taux_hat(), gamma_l);
    CHECK(l_est.point_scalar() ==
          doctest::Approx(n_est.point_scalar() - adj).epsilon(1e-9));
  }
}

TEST_CASE("multi-arm unadjusted fit returns per-arm means") {
  RngStream rng(23, 0);
  ExperimentFrame frame = randomized_multi_arm(2, {10, 12, 14}, rng);
  Vector y(frame.n());
  for (int i = 0; i < frame.n(); ++i)
    y[i] = frame.assignment()[i] * 1.5 + 0.1 * frame.x()(i, 0);
  frame.set_outcomes(y);
  ArmMeansFit fit = estimate_multi_arm(frame, EstimatorKind::unadjusted);
  for (int level = 1; level <= 3; ++level) {
    double mean = 0.0;
    int cnt = 0;
    for (int i = 0; i < frame.n(); ++i)
      if (frame.assignment()[i] == level) {
        mean += y[i];
        ++cnt;
      }
    mean /= cnt;
    CHECK(fit.y_hat[level - 1] == doctest::Approx(mean).epsilon(1e-10));
  }
}

TEST_CASE("two-arm reduction of the multi-arm path") {
  RngStream rng(24, 0);
  ExperimentFrame frame = frame_with_outcomes(80, 30, 2, rng);
  for (EstimatorKind kind :
       {EstimatorKind::unadjusted, EstimatorKind::additive,
        EstimatorKind::interacted}) {
    EffectEstimate direct = estimate_two_arm(frame, kind);
    ArmMeansFit fit = estimate_multi_arm(frame, kind);
    auto [tau, cov] =
        apply_contrast(fit.y_hat, fit.ehw_cov, Contrast::difference_two_arm());
    CHECK(tau[0] == doctest::Approx(direct.point_scalar()).epsilon(1e-10));
    CHECK(cov(0, 0) ==
          doctest::Approx(direct.ehw_cov(0, 0)).epsilon(1e-6));
  }
}

TEST_CASE("contrast arithmetic and validation") {
  Contrast g(Matrix{{1.0, -1.0, 0.0}});
  auto [tau, cov] =
      apply_contrast({3.0, 1.0, 7.0}, Matrix::identity(3), g);
  CHECK(tau[0] == doctest::Approx(2.0));
  CHECK(cov(0, 0) == doctest::Approx(2.0));
  CHECK(cov(0, 0) >= 0.0);

  CHECK_THROWS_AS(Contrast(Matrix{{1.0, 1.0}}), std::invalid_argument);

  Contrast avg(Matrix{{-1.0, 1.0 / 3, 1.0 / 3, 1.0 / 3}});
  auto [tau2, cov2] = apply_contrast({1.0, 2.0, 3.0, 4.0},
                                     Matrix::identity(4), avg);
  CHECK(tau2[0] == doctest::Approx(2.0));
}

TEST_CASE("tau_L is invariant under affine covariate maps") {
  RngStream rng(25, 0);
  ExperimentFrame frame = frame_with_outcomes(100, 40, 2, rng);
  EffectEstimate base = estimate_two_arm(frame, EstimatorKind::interacted);

  Matrix ax(frame.n(), 2);
  for (int i = 0; i < frame.n(); ++i) {
    ax(i, 0) = 2.0 * frame.x()(i, 0) - frame.x()(i, 1) + 3.0;
    ax(i, 1) = 0.5 * frame.x()(i, 0) + frame.x()(i, 1) - 1.0;
  }
  ExperimentFrame mapped = ExperimentFrame::two_arm(ax, frame.n0(), frame.n1());
  mapped.set_assignment(frame.assignment_external());
  mapped.set_outcomes(frame.outcomes());
  EffectEstimate moved = estimate_two_arm(mapped, EstimatorKind::interacted);
  CHECK(moved.point_scalar() ==
        doctest::Approx(base.point_scalar()).epsilon(1e-8));
  CHECK(moved.ehw_cov(0, 0) ==
        doctest::Approx(base.ehw_cov(0, 0)).epsilon(1e-8));
}

TEST_CASE("c_F vanishes for equal arm sizes") {
  RngStream rng(26, 0);
  ExperimentFrame frame = frame_with_outcomes(100, 50, 2, rng);
  EffectEstimate est = estimate_two_arm(frame, EstimatorKind::additive);
  for (double v : *est.c_hat_f) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("arm size guard for the interacted kind") {
  RngStream rng(27, 0);
  Matrix x = uniform_covariates(20, 5, rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 14, 6);
  std::vector<int> z(20, 0);
  for (int i = 0; i < 6; ++i) z[i] = 1;
  frame.set_assignment(z);
  Vector y(20, 1.0);
  for (int i = 0; i < 20; ++i) y[i] += 0.1 * i;
  frame.set_outcomes(y);
  CHECK_THROWS_AS(estimate_two_arm(frame, EstimatorKind::interacted),
                  ArmTooSmall);
}

TEST_CASE("oracle theory moments satisfy the variance decomposition") {
  RngStream rng(28, 0);
  GeneratorSpec spec = GeneratorSpec::two_arm_cubic();
  PotentialOutcomeTable pop = generate_population(spec, rng);
  TheoryMoments tm = theory_variances(pop);

  // V_* = V_L + Gamma_* V_x Gamma_*' with V_x the JQ x JQ covariance
  Matrix vx_big = big_v_x(pop.frame());
  for (auto [v, g] : {std::pair<const Matrix*, const Matrix*>{&tm.v_n,
                                                              &tm.gamma_n},
                      {&tm.v_f, &tm.gamma_f}}) {
    Matrix rhs = tm.v_l + (*g) * vx_big * g->transposed();
    double worst = 0.0, scale = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        worst = std::max(worst, std::fabs((*v)(a, b) - rhs(a, b)));
        scale = std::max(scale, std::fabs((*v)(a, b)));
      }
    CHECK(worst < 1e-6 * scale);
  }

  // scalar identity: v_* - v_L = c' v_x^{-1} c
  double gap_n = tm.v_n_scalar - tm.v_l_scalar;
  CHECK(gap_n ==
        doctest::Approx(mahalanobis(tm.c_n, tm.v_x)).epsilon(1e-8));
  double gap_f = tm.v_f_scalar - tm.v_l_scalar;
  CHECK(gap_f ==
        doctest::Approx(mahalanobis(tm.c_f, tm.v_x)).epsilon(1e-6));
}

TEST_CASE("constant treatment effects zero out c_F") {
  RngStream rng(29, 0);
  const int n = 200;
  Matrix x = uniform_covariates(n, 2, rng);
  GeneratorSpec spec;
  spec.n = n;
  spec.j = 2;
  spec.q = 2;
  spec.arms = {120, 80};
  spec.link = LinkFamily::linear;
  spec.noise_sd = {0.0, 0.0};
  PotentialOutcomeTable pop;
  pop.spec = spec;
  pop.covariates = x;
  // center covariates by hand to mirror the generator contract
  for (int k = 0; k < 2; ++k) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += pop.covariates(i, k);
    for (int i = 0; i < n; ++i) pop.covariates(i, k) -= m / n;
  }
  pop.potentials = Matrix(n, 2);
  for (int i = 0; i < n; ++i) {
    double base = pop.covariates(i, 0) - 0.3 * pop.covariates(i, 1);
    pop.potentials(i, 1) = base;        // control
    pop.potentials(i, 0) = base + 2.0;  // treated: constant shift
  }
  TheoryMoments tm = theory_variances(pop);
  for (double v : tm.c_f) CHECK(std::fabs(v) < 1e-10);
}

TEST_CASE("c-hat estimates converge to the oracle c vectors") {
  // Large-N Monte Carlo: within-arm slope plug-ins approach the population
  // c vectors computed from the full potential table.
  GeneratorSpec spec;
  spec.n = 10000;
  spec.j = 3;
  spec.q = 2;
  spec.arms = {7000, 3000};
  spec.link = LinkFamily::linear;
  spec.noise_sd = {0.4, 0.8};
  RngStream pop_rng(260, 0);
  PotentialOutcomeTable pop = generate_population(spec, pop_rng);
  TheoryMoments tm = theory_variances(pop);

  int good_n = 0, good_f = 0;
  const int draws = 10;
  for (int d = 0; d < draws; ++d) {
    RngStream rng(261, static_cast<std::uint64_t>(d));
    ExperimentFrame frame = pop.frame();
    frame.set_assignment(complete_randomization(spec.arms, rng));
    frame.set_outcomes(pop.observed(frame.assignment()));
    EffectEstimate est = estimate_two_arm(frame, EstimatorKind::unadjusted);
    double rel_n = norm2(*est.c_hat_n - tm.c_n) / norm2(tm.c_n);
    double rel_f = norm2(*est.c_hat_f - tm.c_f) / norm2(tm.c_f);
    if (rel_n < 0.10) ++good_n;
    if (rel_f < 0.10) ++good_f;
  }
  CHECK(good_n >= 9);
  CHECK(good_f >= 9);
}

TEST_CASE("N se_L^2 is conservative for the true variance of tau_L") {
  RngStream pop_rng(262, 0);
  PotentialOutcomeTable pop =
      generate_population(GeneratorSpec::two_arm_cubic(), pop_rng);
  const std::vector<int> arms = pop.spec.arms;
  ExperimentFrame base = pop.frame();

  const int reps = 1500;
  double sum_var_est = 0.0;
  std::vector<double> taus(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(263, static_cast<std::uint64_t>(r));
    ExperimentFrame frame = base;
    frame.set_assignment(complete_randomization(arms, rng));
    frame.set_outcomes(pop.observed(frame.assignment()));
    EffectEstimate est = estimate_two_arm(frame, EstimatorKind::interacted);
    taus[r] = est.point_scalar();
    sum_var_est += base.n() * est.ehw_cov(0, 0);
  }
  double mean_est = sum_var_est / reps;
  double m = 0.0;
  for (double t : taus) m += t;
  m /= reps;
  double v = 0.0, m4 = 0.0;
  for (double t : taus) {
    v += (t - m) * (t - m);
    m4 += std::pow(t - m, 4);
  }
  v = v * base.n() / (reps - 1);
  m4 = m4 * base.n() * base.n() / reps;
  double var_se = std::sqrt(std::max(m4 - v * v, 0.0) / reps);
  CHECK(mean_est >= v - 2.0 * var_se);
}

TEST_CASE("plug-in interval: interacted kind returns the normal interval") {
  RngStream rng(30, 0);
  ExperimentFrame frame = frame_with_outcomes(120, 40, 2, rng);
  EffectEstimate est = estimate_two_arm(frame, EstimatorKind::interacted);
  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.2};
  s.alpha_joint = 0.5;
  RngStream law_rng(31, 0);
  Interval iv = plugin_inference(est, frame, s, 0.95, 1000, law_rng);
  CHECK(iv.lo == doctest::Approx(est.normal_ci[0].lo).epsilon(1e-12));
  CHECK(iv.hi == doctest::Approx(est.normal_ci[0].hi).epsilon(1e-12));
}

TEST_CASE("plug-in interval is narrower than the normal interval") {
  RngStream rng(32, 0);
  ExperimentFrame frame = frame_with_outcomes(400, 100, 3, rng, 0.5);
  EffectEstimate est = estimate_two_arm(frame, EstimatorKind::unadjusted);
  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.2};
  s.alpha_joint = 0.55;
  RngStream law_rng(33, 0);
  Interval iv = plugin_inference(est, frame, s, 0.95, 40000, law_rng);
  CHECK(iv.width() < est.normal_ci[0].width() * 1.02);
  CHECK(iv.covers(est.point_scalar()));
}
