#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rep/estimate.hpp"
#include "rep/frame.hpp"
#include "rep/matrix.hpp"
#include "rep/rng.hpp"

namespace rep {

enum class LinkFamily { cubic_sum, linear, binary_logit };

std::string to_string(LinkFamily f);
LinkFamily link_from_string(const std::string& s);

// What to synthesize. arms follows the external convention:
// (n_control, n_treated) for two arms, (N_1, ..., N_Q) otherwise.
// noise_sd is indexed like arms and applies to the cubic_sum and linear
// links; slope_scale controls the covariate signal of the binary link.
struct GeneratorSpec {
  int n = 0;
  int j = 0;
  int q = 2;
  std::vector<int> arms;
  LinkFamily link = LinkFamily::cubic_sum;
  Vector noise_sd;
  double slope_scale = 3.0;

  static GeneratorSpec two_arm_cubic();     // N=500, J=5, arms (400,100)
  static GeneratorSpec multi_arm_binary();  // N=2298, Q=4, J=7

  void validate() const;
};

// Fixed potential-outcome table: the estimand and every sampling
// distribution are functions of this object plus the assignment draw.
// Potentials are stored by internal level, so column 0 is the treated arm
// when Q = 2.
struct PotentialOutcomeTable {
  Matrix covariates;  // centered
  Matrix potentials;  // N x Q
  GeneratorSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  ExperimentFrame frame() const;  // no assignment attached
  Vector ybar() const;            // column means, by internal level
  double tau(const Contrast& contrast) const;
  Vector observed(const std::vector<int>& internal_assignment) const;
};

PotentialOutcomeTable generate_population(const GeneratorSpec& spec,
                                          RngStream& rng);

// Oracle moments computed from the full table: finite-population V_*,
// Gamma_*, and the two-arm scalars of the CLT under complete randomization.
struct TheoryMoments {
  std::vector<Vector> gamma_q;  // per internal level
  Matrix s_n, s_f, s_l;         // Q x Q adjusted-potential covariances
  Matrix v_n, v_f, v_l;         // Q x Q sampling covariances
  Matrix gamma_n, gamma_f;      // Q x JQ projection maps
  Matrix v_x;                   // (e0 e1)^{-1} S2x, two-arm only
  Vector c_n, c_f;              // two-arm only
  double v_n_scalar = 0.0, v_f_scalar = 0.0, v_l_scalar = 0.0;
};

TheoryMoments theory_variances(const PotentialOutcomeTable& pop);

}  // namespace rep
