#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rep/frame.hpp"
#include "rep/matrix.hpp"

namespace rep {

enum class Model { t, lm, logit, f, mlogit, rem };
enum class Rule { marginal, joint, consensus };
enum class JointReference { default_ref, wald };
enum class Studentization { classic, ehw };

std::string to_string(Model m);
std::string to_string(Rule r);
Model model_from_string(const std::string& s);
Rule rule_from_string(const std::string& s);

// One acceptance criterion: model option x rule x thresholds.
// alpha_marginal holds one entry per covariate (or per (level, covariate)
// pair for mlogit with Q > 2); a single entry broadcasts.
struct BalanceScheme {
  Model model = Model::t;
  Rule rule = Rule::joint;
  std::vector<double> alpha_marginal;
  double alpha_joint = 0.0;
  JointReference joint_reference = JointReference::default_ref;
  Studentization studentization = Studentization::classic;
  std::string id;  // label used in records and summaries

  bool uses_marginal() const { return rule != Rule::joint; }
  bool uses_joint() const { return rule != Rule::marginal; }

  // Throws IncompatibleScheme when rule/model/threshold combinations are
  // invalid for a frame with the given dimensions.
  void validate(int j, int q) const;

  // Marginal thresholds expanded to the full length (J or J(Q-1)).
  std::vector<double> marginal_alphas(int j, int q) const;

  std::string display_id() const;
};

struct BalanceReport {
  Vector marginal_stats;
  Vector marginal_pvalues;
  std::optional<double> joint_stat;
  std::optional<double> joint_pvalue;
  Vector taux_hat;  // tau_x for Q = 2; stacked non-reference means otherwise
  bool accepted = false;
  std::map<std::string, int> diagnostics;
};

struct MarginalTest {
  double stat = 0.0;
  double pvalue = 1.0;
};

// Two-sample t-test per covariate against t_{N-2}; identical to the Z
// coefficient output of lm(x_j ~ 1 + Z).
std::vector<MarginalTest> t_marginal(
    const ExperimentFrame& frame,
    Studentization studentization = Studentization::classic);

enum class TJointReference { wald_chisq, hotelling };

// W_t = taux' Omega^{-1} taux with the pooled covariance Omega.
std::pair<double, double> t_joint(
    const ExperimentFrame& frame,
    TJointReference reference = TJointReference::wald_chisq,
    Studentization studentization = Studentization::classic);

struct LmBalance {
  Vector t_stats;
  Vector p_values;   // t_{N-1-J} reference
  double f_stat = 0.0;
  double f_pvalue = 1.0;  // F_{J, N-1-J}
  double wald_stat = 0.0;
  double wald_pvalue = 1.0;  // chi^2_J
  Vector beta;
};

LmBalance lm_balance(const ExperimentFrame& frame,
                     Studentization studentization = Studentization::classic);

struct MlogitBalance {
  Vector z_stats;       // lexicographic (level, covariate) order
  Vector p_values;      // standard normal reference
  double lrt_stat = 0.0;
  double lrt_pvalue = 1.0;  // chi^2_{J(Q-1)}
  double wald_stat = 0.0;
  double wald_pvalue = 1.0;
  Vector beta;
};

// Q = 2 logistic regression balance outputs.
MlogitBalance logit_balance(
    const ExperimentFrame& frame,
    Studentization studentization = Studentization::classic);

// General-Q multinomial logistic balance outputs (level Q is the reference);
// coincides with logit_balance when Q = 2.
MlogitBalance mlogit_balance(
    const ExperimentFrame& frame,
    Studentization studentization = Studentization::classic);

// Covariate-wise one-way F tests against F_{Q-1, N-Q}.
std::vector<MarginalTest> f_balance(const ExperimentFrame& frame);

// Mahalanobis criterion with the exact finite-sample covariance of taux,
// (1/N1 + 1/N0) S2x. Returns (distance, distance <= a0).
std::pair<double, bool> rem_check(const ExperimentFrame& frame, double a0);

// Applies a scheme to the frame's assignment. An allocation whose MLE fails
// is rejected with diagnostics["mle_failures"] incremented.
BalanceReport evaluate(const ExperimentFrame& frame,
                       const BalanceScheme& scheme);

}  // namespace rep
