#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sddekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VecIn = Eigen::Ref<const Eigen::VectorXd>;
using VecOut = Eigen::Ref<Eigen::VectorXd>;
using MatOut = Eigen::Ref<Eigen::MatrixXd>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, violated preconditions, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A delayed lookup reached below the declared history depth.
class HistoryUnderflow : public Error {
 public:
  using Error::Error;
};

/// The implicit stage equation did not converge within the iteration budget.
class StageSolveFailure : public Error {
 public:
  StageSolveFailure(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// A NaN or Inf appeared while iterating on a stage equation.
class SolverDivergence : public StageSolveFailure {
 public:
  using StageSolveFailure::StageSolveFailure;
};

/// An analytic quantity is undefined for the given constants
/// (for example a decay rate when beta >= 0).
class NotApplicable : public Error {
 public:
  using Error::Error;
};

inline constexpr double kDefaultBlowupThreshold = 1e10;

}  // namespace sddekit
