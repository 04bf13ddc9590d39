#include "rep/balance.hpp"

#include <cmath>
#include <limits>

#include "rep/distributions.hpp"
#include "rep/errors.hpp"
#include "rep/regression.hpp"

namespace rep {

namespace {

void require_assignment(const ExperimentFrame& frame) {
  if (!frame.has_assignment())
    throw InvalidFrame("balance test needs an assignment");
}

// Sample covariance of x within one internal level, (N_q - 1) denominator.
Matrix within_level_cov(const ExperimentFrame& frame, int level) {
  const Matrix& x = frame.x();
  const int j = frame.j();
  Vector mean = frame.xhat(level);
  Matrix s(j, j);
  int cnt = 0;
  for (int i = 0; i < frame.n(); ++i) {
    if (frame.assignment()[i] != level) continue;
    ++cnt;
    const double* row = x.row_ptr(i);
    for (int a = 0; a < j; ++a)
      for (int b = a; b < j; ++b)
        s(a, b) += (row[a] - mean[a]) * (row[b] - mean[b]);
  }
  for (int a = 0; a < j; ++a)
    for (int b = 0; b < a; ++b) s(a, b) = s(b, a);
  s *= 1.0 / (cnt - 1);
  return s;
}

// Pooled covariance of taux: classic uses the N-2 pooled estimate, ehw the
// Behrens-Fisher form S1/N1 + S0/N0.
Matrix omega_hat(const ExperimentFrame& frame, Studentization studentization) {
  const int n1 = frame.n1(), n0 = frame.n0();
  Matrix s1 = within_level_cov(frame, 1);
  Matrix s0 = within_level_cov(frame, 2);
  if (studentization == Studentization::ehw)
    return (1.0 / n1) * s1 + (1.0 / n0) * s0;
  Matrix pooled = (n1 - 1.0) * s1 + (n0 - 1.0) * s0;
  pooled *= 1.0 / (n1 + n0 - 2.0);
  return (1.0 / n1 + 1.0 / n0) * pooled;
}

double two_sided_p(const DistributionId& d, double stat) {
  return 2.0 * (1.0 - cdf(d, std::fabs(stat)));
}

double upper_p(const DistributionId& d, double stat) {
  return 1.0 - cdf(d, stat);
}

}  // namespace

std::string to_string(Model m) {
  switch (m) {
    case Model::t: return "t";
    case Model::lm: return "lm";
    case Model::logit: return "logit";
    case Model::f: return "f";
    case Model::mlogit: return "mlogit";
    case Model::rem: return "rem";
  }
  return "?";
}

std::string to_string(Rule r) {
  switch (r) {
    case Rule::marginal: return "marginal";
    case Rule::joint: return "joint";
    case Rule::consensus: return "consensus";
  }
  return "?";
}

Model model_from_string(const std::string& s) {
  if (s == "t") return Model::t;
  if (s == "lm") return Model::lm;
  if (s == "logit") return Model::logit;
  if (s == "f") return Model::f;
  if (s == "mlogit") return Model::mlogit;
  if (s == "rem") return Model::rem;
  throw IncompatibleScheme("unknown model option: " + s);
}

Rule rule_from_string(const std::string& s) {
  if (s == "marginal") return Rule::marginal;
  if (s == "joint") return Rule::joint;
  if (s == "consensus") return Rule::consensus;
  throw IncompatibleScheme("unknown rule: " + s);
}

std::string BalanceScheme::display_id() const {
  if (!id.empty()) return id;
  return to_string(model) + "_" + to_string(rule);
}

void BalanceScheme::validate(int j, int q) const {
  if (model == Model::f && rule != Rule::marginal)
    throw IncompatibleScheme("the F-test scheme supports the marginal rule only");
  if (model == Model::rem && rule != Rule::joint)
    throw IncompatibleScheme("the ReM scheme supports the joint rule only");
  if ((model == Model::t || model == Model::lm || model == Model::logit ||
       model == Model::rem) &&
      q != 2)
    throw IncompatibleScheme(to_string(model) +
                             " scheme requires a two-arm experiment");
  if ((model == Model::f || model == Model::rem) &&
      studentization == Studentization::ehw)
    throw IncompatibleScheme("EHW studentization is not defined for " +
                             to_string(model));
  if (uses_joint() && !(alpha_joint > 0.0 && alpha_joint < 1.0))
    throw IncompatibleScheme("alpha_joint must lie in (0, 1)");
  if (uses_marginal()) {
    const std::size_t want =
        model == Model::mlogit ? std::size_t(j) * (q - 1) : std::size_t(j);
    if (alpha_marginal.size() != 1 && alpha_marginal.size() != want)
      throw IncompatibleScheme("alpha_marginal length must be 1 or match the "
                               "number of marginal tests");
    for (double a : alpha_marginal)
      if (!(a > 0.0 && a < 1.0))
        throw IncompatibleScheme("marginal alphas must lie in (0, 1)");
  }
}

std::vector<double> BalanceScheme::marginal_alphas(int j, int q) const {
  const std::size_t want =
      model == Model::mlogit ? std::size_t(j) * (q - 1) : std::size_t(j);
  if (alpha_marginal.size() == want) return alpha_marginal;
  return std::vector<double>(want, alpha_marginal.at(0));
}

std::vector<MarginalTest> t_marginal(const ExperimentFrame& frame,
                                     Studentization studentization) {
  if (frame.q() != 2) throw WrongArmCount("t test needs exactly two arms");
  require_assignment(frame);
  const int n = frame.n(), j = frame.j();
  Vector taux = frame.taux_hat();
  Matrix omega = omega_hat(frame, studentization);
  std::vector<MarginalTest> out(j);
  const auto ref = DistributionId::t(n - 2);
  for (int k = 0; k < j; ++k) {
    double se = std::sqrt(omega(k, k));
    double t;
    if (se > 0.0) {
      t = taux[k] / se;
    } else {
      // zero pooled variance: either perfect balance or maximal imbalance
      t = taux[k] == 0.0 ? 0.0
                         : std::copysign(
                               std::numeric_limits<double>::infinity(),
                               taux[k]);
    }
    out[k].stat = t;
    out[k].pvalue = std::isinf(t) ? 0.0 : two_sided_p(ref, t);
  }
  return out;
}

std::pair<double, double> t_joint(const ExperimentFrame& frame,
                                  TJointReference reference,
                                  Studentization studentization) {
  if (frame.q() != 2) throw WrongArmCount("t test needs exactly two arms");
  require_assignment(frame);
  Vector taux = frame.taux_hat();
  Matrix omega = omega_hat(frame, studentization);
  double w = mahalanobis(taux, omega);
  double p;
  if (reference == TJointReference::hotelling)
    p = upper_p(DistributionId::hotelling(frame.j(), frame.n() - 2), w);
  else
    p = upper_p(DistributionId::chi2(frame.j()), w);
  return {w, p};
}

LmBalance lm_balance(const ExperimentFrame& frame,
                     Studentization studentization) {
  if (frame.q() != 2) throw WrongArmCount("lm balance needs two arms");
  require_assignment(frame);
  const int n = frame.n(), j = frame.j();

  Matrix design(n, j + 1);
  Vector z(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int k = 0; k < j; ++k) design(i, k + 1) = frame.x()(i, k);
    z[i] = frame.assignment()[i] == 1 ? 1.0 : 0.0;
  }
  OlsFit full = ols_fit(design, z);
  OlsFit null = ols_fit(Matrix(n, 1, 1.0), z);

  LmBalance out;
  out.beta.assign(full.coefficients.begin() + 1, full.coefficients.end());
  const Matrix& cov_source = studentization == Studentization::ehw
                                 ? full.ehw_cov
                                 : full.classic_cov;
  Matrix vhat(j, j);
  for (int a = 0; a < j; ++a)
    for (int b = 0; b < j; ++b) vhat(a, b) = cov_source(a + 1, b + 1);

  out.t_stats.resize(j);
  out.p_values.resize(j);
  const auto ref = DistributionId::t(n - 1 - j);
  for (int k = 0; k < j; ++k) {
    out.t_stats[k] = out.beta[k] / std::sqrt(vhat(k, k));
    out.p_values[k] = two_sided_p(ref, out.t_stats[k]);
  }

  auto [f, fp] = ols_f_test(full, null);
  out.f_stat = f;
  out.f_pvalue = fp;

  out.wald_stat = wald_stat(out.beta, vhat);
  out.wald_pvalue = upper_p(DistributionId::chi2(j), out.wald_stat);
  return out;
}

MlogitBalance mlogit_balance(const ExperimentFrame& frame,
                             Studentization studentization) {
  require_assignment(frame);
  const int j = frame.j(), q = frame.q();
  MleFit fit = mlogit_fit(frame.assignment(), frame.x());

  MlogitBalance out;
  out.beta = fit.beta_stacked();
  const Matrix& cov =
      studentization == Studentization::ehw ? fit.cov_ehw : fit.cov;

  const int m = j * (q - 1);
  out.z_stats.resize(m);
  out.p_values.resize(m);
  const auto normal = DistributionId::normal();
  for (int k = 0; k < m; ++k) {
    out.z_stats[k] = out.beta[k] / std::sqrt(cov(k, k));
    out.p_values[k] = two_sided_p(normal, out.z_stats[k]);
  }

  out.lrt_stat = mlogit_lrt(fit, frame.assignment(), frame.x());
  out.lrt_pvalue = upper_p(DistributionId::chi2(m), out.lrt_stat);
  out.wald_stat = wald_stat(out.beta, cov);
  out.wald_pvalue = upper_p(DistributionId::chi2(m), out.wald_stat);
  return out;
}

MlogitBalance logit_balance(const ExperimentFrame& frame,
                            Studentization studentization) {
  if (frame.q() != 2) throw WrongArmCount("logit balance needs two arms");
  return mlogit_balance(frame, studentization);
}

std::vector<MarginalTest> f_balance(const ExperimentFrame& frame) {
  require_assignment(frame);
  const int n = frame.n(), j = frame.j(), q = frame.q();
  std::vector<MarginalTest> out(j);
  const auto ref = DistributionId::fdist(q - 1, n - q);

  std::vector<Vector> means(q);
  for (int level = 1; level <= q; ++level) means[level - 1] = frame.xhat(level);

  for (int k = 0; k < j; ++k) {
    double between = 0.0;
    for (int level = 1; level <= q; ++level)
      between += frame.count(level) * means[level - 1][k] * means[level - 1][k];
    double within = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = frame.x()(i, k) - means[frame.assignment()[i] - 1][k];
      within += d * d;
    }
    if (within <= 0.0)
      throw DegenerateWithinVariance("zero within-group variation");
    double f = (between / (q - 1)) / (within / (n - q));
    out[k].stat = f;
    out[k].pvalue = upper_p(ref, f);
  }
  return out;
}

std::pair<double, bool> rem_check(const ExperimentFrame& frame, double a0) {
  if (frame.q() != 2) throw WrongArmCount("ReM check needs two arms");
  require_assignment(frame);
  Matrix cov = (1.0 / frame.n1() + 1.0 / frame.n0()) * frame.s2x();
  double dist = mahalanobis(frame.taux_hat(), cov);
  return {dist, dist <= a0};
}

BalanceReport evaluate(const ExperimentFrame& frame,
                       const BalanceScheme& scheme) {
  const int j = frame.j(), q = frame.q();
  scheme.validate(j, q);
  require_assignment(frame);

  BalanceReport report;
  report.taux_hat = q == 2 ? frame.taux_hat() : frame.xhat_plus();

  try {
    switch (scheme.model) {
      case Model::t: {
        if (scheme.uses_marginal()) {
          auto tests = t_marginal(frame, scheme.studentization);
          for (const auto& t : tests) {
            report.marginal_stats.push_back(t.stat);
            report.marginal_pvalues.push_back(t.pvalue);
          }
        }
        if (scheme.uses_joint()) {
          auto [w, p] =
              t_joint(frame, TJointReference::wald_chisq, scheme.studentization);
          report.joint_stat = w;
          report.joint_pvalue = p;
        }
        break;
      }
      case Model::lm: {
        LmBalance lb = lm_balance(frame, scheme.studentization);
        if (scheme.uses_marginal()) {
          report.marginal_stats = lb.t_stats;
          report.marginal_pvalues = lb.p_values;
        }
        if (scheme.uses_joint()) {
          // The F test is the packaged default; the Wald alternative (and
          // any EHW studentization) goes through the chi-square Wald form.
          if (scheme.joint_reference == JointReference::wald ||
              scheme.studentization == Studentization::ehw) {
            report.joint_stat = lb.wald_stat;
            report.joint_pvalue = lb.wald_pvalue;
          } else {
            report.joint_stat = lb.f_stat;
            report.joint_pvalue = lb.f_pvalue;
          }
        }
        break;
      }
      case Model::logit:
      case Model::mlogit: {
        MlogitBalance mb = scheme.model == Model::logit
                               ? logit_balance(frame, scheme.studentization)
                               : mlogit_balance(frame, scheme.studentization);
        if (scheme.uses_marginal()) {
          report.marginal_stats = mb.z_stats;
          report.marginal_pvalues = mb.p_values;
        }
        if (scheme.uses_joint()) {
          if (scheme.joint_reference == JointReference::wald) {
            report.joint_stat = mb.wald_stat;
            report.joint_pvalue = mb.wald_pvalue;
          } else {
            report.joint_stat = mb.lrt_stat;
            report.joint_pvalue = mb.lrt_pvalue;
          }
        }
        break;
      }
      case Model::f: {
        auto tests = f_balance(frame);
        for (const auto& t : tests) {
          report.marginal_stats.push_back(t.stat);
          report.marginal_pvalues.push_back(t.pvalue);
        }
        break;
      }
      case Model::rem: {
        double a0 =
            quantile(DistributionId::chi2(j), 1.0 - scheme.alpha_joint);
        auto [dist, ok] = rem_check(frame, a0);
        (void)ok;
        report.joint_stat = dist;
        report.joint_pvalue = upper_p(DistributionId::chi2(j), dist);
        break;
      }
    }
  } catch (const MleFailure&) {
    // Non-convergence signals extreme imbalance; reject the allocation.
    report.accepted = false;
    ++report.diagnostics["mle_failures"];
    return report;
  }

  bool ok = true;
  if (scheme.uses_marginal()) {
    auto alphas = scheme.marginal_alphas(j, q);
    for (std::size_t k = 0; k < report.marginal_pvalues.size(); ++k)
      ok = ok && report.marginal_pvalues[k] >= alphas[k];
  }
  if (scheme.uses_joint())
    ok = ok && *report.joint_pvalue >= scheme.alpha_joint;
  report.accepted = ok;
  return report;
}

}  // namespace rep
