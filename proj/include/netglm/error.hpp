#pragma once

#include <stdexcept>
#include <string>

namespace netglm {

/// Bad input: out-of-range index, dimension mismatch, invalid parameter.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few vertices / observations for the requested operation.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A randomized generator ran out of its attempt budget.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Request would exceed a hard resource limit (e.g. 2^n enumeration).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factorization failed.
class NotSpdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN / inf encountered during an iterative computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A statistic collapsed to a degenerate value (zero variance, zero target, d < 2).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The projection program stayed infeasible after all constant inflations.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double residual_inf, double residual_scalar,
                  double residual_max)
      : std::runtime_error(what),
        residual_inf(residual_inf),
        residual_scalar(residual_scalar),
        residual_max(residual_max) {}

  double residual_inf;
  double residual_scalar;
  double residual_max;
};

/// Every replicate of an experiment failed.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netglm
