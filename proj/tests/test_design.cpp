#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rep/design.hpp"
#include "rep/errors.hpp"
#include "test_helpers.hpp"

using namespace rep;
using namespace rep::testing;

TEST_CASE("complete randomization honors arm counts exactly") {
  RngStream rng(1, 0);
  for (int rep = 0; rep < 20; ++rep) {
    auto z = complete_randomization({400, 100}, rng);
    CHECK(z.size() == 500);
    long ones = 0;
    for (int v : z) ones += v;
    CHECK(ones == 100);
  }
  auto zq = complete_randomization({3, 4, 5}, rng);
  std::map<int, int> counts;
  for (int v : zq) ++counts[v];
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 4);
  CHECK(counts[3] == 5);

  CHECK_THROWS_AS(complete_randomization({0, 5}, rng), EmptyArm);
}

TEST_CASE("two-unit design is a fair coin") {
  RngStream rng(2, 0);
  int first_treated = 0;
  const int draws = 40000;
  for (int d = 0; d < draws; ++d) {
    auto z = complete_randomization({1, 1}, rng);
    first_treated += z[0];
  }
  double freq = double(first_treated) / draws;
  CHECK(std::fabs(freq - 0.5) < 0.01);
}

TEST_CASE("fixed seed reproduces the draw") {
  RngStream a(42, 7), b(42, 7);
  auto za = complete_randomization({30, 10, 20}, a);
  auto zb = complete_randomization({30, 10, 20}, b);
  CHECK(za == zb);
}

TEST_CASE("vacuous scheme accepts immediately") {
  RngStream frame_rng(3, 0);
  Matrix x = uniform_covariates(100, 3, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 70, 30);

  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::consensus;
  s.alpha_marginal = {1e-12};
  s.alpha_joint = 1e-12;

  RngStream rng(4, 0);
  DesignResult res = rerandomize(frame, s, rng, 50);
  CHECK(res.draws_used == 1);
  CHECK(res.report.accepted);
  CHECK(res.acceptance_rate_estimate == doctest::Approx(1.0));
  long ones = 0;
  for (int v : res.assignment) ones += v;
  CHECK(ones == 30);
}

TEST_CASE("impossible scheme raises MaxDrawsExceeded with diagnostics") {
  RngStream frame_rng(5, 0);
  Matrix x = uniform_covariates(60, 2, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 40, 20);

  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.5};
  s.alpha_joint = 1.0 - 1e-12;

  RngStream rng(6, 0);
  try {
    rerandomize(frame, s, rng, 200);
    FAIL("expected MaxDrawsExceeded");
  } catch (const MaxDrawsExceeded& e) {
    CHECK(e.attempted == 200);
    CHECK(e.best_joint_p > 0.0);
    CHECK(e.best_joint_p < 1.0);
  }
}

TEST_CASE("accepted draws satisfy the filter by construction") {
  RngStream frame_rng(7, 0);
  Matrix x = uniform_covariates(120, 3, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 80, 40);

  BalanceScheme s;
  s.model = Model::lm;
  s.rule = Rule::consensus;
  s.alpha_marginal = {0.2, 0.25, 0.3};
  s.alpha_joint = 0.4;

  auto alphas = s.marginal_alphas(3, 2);
  for (int d = 0; d < 40; ++d) {
    RngStream rng(8, static_cast<std::uint64_t>(d));
    DesignResult res = rerandomize(frame, s, rng);
    CHECK(res.report.accepted);
    for (std::size_t k = 0; k < res.report.marginal_pvalues.size(); ++k)
      CHECK(res.report.marginal_pvalues[k] >= alphas[k]);
    CHECK(*res.report.joint_pvalue >= s.alpha_joint);
  }
}

TEST_CASE("replay determinism of rerandomize") {
  RngStream frame_rng(9, 0);
  Matrix x = uniform_covariates(80, 2, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 50, 30);

  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.2};
  s.alpha_joint = 0.6;

  RngStream r1(10, 3), r2(10, 3);
  DesignResult a = rerandomize(frame, s, r1);
  DesignResult b = rerandomize(frame, s, r2);
  CHECK(a.assignment == b.assignment);
  CHECK(a.draws_used == b.draws_used);

  RngStream r3(10, 4);
  DesignResult c = rerandomize(frame, s, r3);
  CHECK(a.assignment != c.assignment);  // different stream, different path
}

TEST_CASE("acceptance-rate estimator matches the asymptotic null rate") {
  // Joint t rule: P(accept) -> P(chi2_J <= a0) = 1 - alpha0 at large N.
  RngStream frame_rng(11, 0);
  Matrix x = uniform_covariates(10000, 3, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 7000, 3000);

  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.5};
  s.alpha_joint = 0.55;

  RngStream rng(12, 0);
  auto [rate, se] = estimate_acceptance_rate(frame, s, 2000, rng);
  CHECK(std::fabs(rate - 0.45) < 0.035);
  CHECK(se == doctest::Approx(std::sqrt(rate * (1 - rate) / 2000)));
}

TEST_CASE("vacuous and impossible schemes bracket the rate estimator") {
  RngStream frame_rng(13, 0);
  Matrix x = uniform_covariates(60, 2, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 40, 20);

  BalanceScheme easy;
  easy.model = Model::t;
  easy.rule = Rule::joint;
  easy.alpha_marginal = {0.5};
  easy.alpha_joint = 1e-12;
  RngStream rng(14, 0);
  auto [rate_easy, se_easy] = estimate_acceptance_rate(frame, easy, 300, rng);
  CHECK(rate_easy == doctest::Approx(1.0));

  BalanceScheme hard = easy;
  hard.alpha_joint = 1.0 - 1e-12;
  auto [rate_hard, se_hard] = estimate_acceptance_rate(frame, hard, 300, rng);
  CHECK(rate_hard == doctest::Approx(0.0));
}

TEST_CASE("equal arms keep the difference in means unbiased under ReP") {
  RngStream frame_rng(15, 0);
  const int n = 100;
  Matrix x = uniform_covariates(n, 2, frame_rng);
  ExperimentFrame frame = ExperimentFrame::two_arm(x, 50, 50);

  // potential outcomes fixed up front, with unit noise so tau_hat varies
  Vector y1(n), y0(n);
  for (int i = 0; i < n; ++i) {
    double g = x(i, 0) + 0.5 * x(i, 1);
    y1[i] = g + 0.5 * frame_rng.next_normal();
    y0[i] = -g + 0.5 * frame_rng.next_normal();
  }
  double mean1 = 0.0, mean0 = 0.0;
  for (int i = 0; i < n; ++i) {
    mean1 += y1[i];
    mean0 += y0[i];
  }
  mean1 /= n;
  mean0 /= n;
  for (int i = 0; i < n; ++i) {
    y1[i] -= mean1;
    y0[i] -= mean0;
  }

  BalanceScheme s;
  s.model = Model::t;
  s.rule = Rule::joint;
  s.alpha_marginal = {0.5};
  s.alpha_joint = 0.5;

  double sum = 0.0, sumsq = 0.0;
  int kept = 0;
  for (int d = 0; d < 4000; ++d) {
    RngStream rng(16, static_cast<std::uint64_t>(d));
    ExperimentFrame f = frame;
    f.set_assignment(complete_randomization({50, 50}, rng));
    if (!evaluate(f, s).accepted) continue;
    double t1 = 0.0, t0 = 0.0;
    for (int i = 0; i < n; ++i) {
      if (f.assignment()[i] == 1)
        t1 += y1[i];
      else
        t0 += y0[i];
    }
    double tau_hat = t1 / 50 - t0 / 50;
    sum += tau_hat;
    sumsq += tau_hat * tau_hat;
    ++kept;
  }
  double mean = sum / kept;
  double sd = std::sqrt((sumsq / kept - mean * mean) / kept);
  CHECK(std::fabs(mean) < 3.0 * sd);
}
