#pragma once

#include <stdexcept>
#include <string>

namespace rep {

// Numerics
struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonPositiveDiagonal : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidDof : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ProbabilityOutOfRange : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Regression
struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooFewRows : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotNested : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MleFailure : std::runtime_error {
  MleFailure(const std::string& what, int iterations_run)
      : std::runtime_error(what), iterations(iterations_run) {}
  int iterations;
};

// Frames and balance
struct InvalidFrame : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct WrongArmCount : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateWithinVariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IncompatibleScheme : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Design
struct EmptyArm : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MaxDrawsExceeded : std::runtime_error {
  MaxDrawsExceeded(const std::string& what, long attempted_draws,
                   double best_joint_pvalue)
      : std::runtime_error(what),
        attempted(attempted_draws),
        best_joint_p(best_joint_pvalue) {}
  long attempted;
  double best_joint_p;  // largest joint p-value seen; NaN if scheme has none
};

// Estimation
struct ArmTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Law sampling
struct AcceptanceTooLow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulation harness
struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TooFewAccepted : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingPotentials : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rep
