#pragma once

#include <optional>
#include <vector>

#include "rep/balance.hpp"
#include "rep/frame.hpp"
#include "rep/matrix.hpp"
#include "rep/rng.hpp"

namespace rep {

// A centered multivariate normal restricted to a symmetric convex set:
// componentwise box |eps_k| <= box_limits[k], ellipsoid
// eps' metric^{-1} eps <= radius, and/or the grouped quadratic constraint
// of the covariate-wise F scheme, sum_q weights[q] eps_{qj}^2 <= bounds[j]
// with the coordinate layout (level-major) eps_{qj} = eps[(q-1) J + (j-1)].
struct ConstrainedLaw {
  Matrix cov;
  Matrix factor;  // cov = factor factor'; may be rectangular when singular
  std::optional<Vector> box_limits;
  struct Ellipsoid {
    Matrix metric;
    double radius = 0.0;
  };
  std::optional<Ellipsoid> ellipsoid;
  struct GroupedQuadratic {
    Vector weights;  // one per level q = 1..Q
    Vector bounds;   // one per covariate j = 1..J
  };
  std::optional<GroupedQuadratic> grouped;

  std::size_t dim() const { return cov.rows(); }
  bool has_constraint() const {
    return box_limits.has_value() || ellipsoid.has_value() ||
           grouped.has_value();
  }
};

ConstrainedLaw make_constrained_law(Matrix cov);

// Convolution law of sqrt(v_l) eps + map T with T the constrained vector.
struct LawParams {
  Matrix v_l;  // m x m normal-part covariance
  Matrix map;  // m x dim(law)
  ConstrainedLaw law;
};

// Rejection sampler; returns an n x dim matrix of draws. Throws
// AcceptanceTooLow when fewer than one proposal in 10^4 is accepted after
// 10^5 proposals.
Matrix sample_constrained(const ConstrainedLaw& law, long n, RngStream& rng);

// Law parameters for the two-arm schemes of the treatment-control
// experiment. v_l_hat and c_hat are the plug-in estimates of v_L and c_*;
// the remaining ingredients (S2x, arm shares, thresholds) come from the
// frame and scheme.
LawParams build_law_params_two_arm(const ExperimentFrame& frame,
                                   const BalanceScheme& scheme,
                                   double v_l_hat, const Vector& c_hat);

// Multi-arm law parameters. gamma_q holds one slope vector per level; the
// kind selects Gamma_N, Gamma_F, or the zero map of the interacted fit.
// v_l_hat is the Q x Q normal-part covariance estimate.
enum class EstimatorKind { unadjusted, additive, interacted };

LawParams build_law_params_multi_arm(const ExperimentFrame& frame,
                                     const BalanceScheme& scheme,
                                     const std::vector<Vector>& gamma_q,
                                     EstimatorKind kind, const Matrix& v_l_hat);

// Restricts an m-dimensional LawParams to contrasts: v_l -> G v_l G',
// map -> G map.
LawParams apply_contrast_rows(const LawParams& params, const Matrix& g);

// Monte Carlo quantiles of the scalar convolution law (m must be 1),
// by order statistics over n_draws samples. probs must be in (0,1).
Vector convolution_quantiles(const LawParams& params, const Vector& probs,
                             long n_draws, RngStream& rng);

// Building blocks shared with tests and the estimate module.
Matrix kappa_matrix(const ExperimentFrame& frame);   // JQ x J(Q-1)
Matrix big_v_x(const ExperimentFrame& frame);        // JQ x JQ, singular
Matrix v_x_plus(const ExperimentFrame& frame);       // J(Q-1) x J(Q-1)
Matrix psi_matrix(const ExperimentFrame& frame);     // J(Q-1) x J(Q-1)
Matrix psi_inverse(const ExperimentFrame& frame);    // (R+^{-1} Phi) (x) S2x
Matrix v_psi(const ExperimentFrame& frame);          // Phi^{-1} (x) (S2x)^{-1}
Matrix gamma_map(const std::vector<Vector>& gamma_q, EstimatorKind kind,
                 const Vector& level_shares);        // Q x JQ

}  // namespace rep
