#pragma once

#include <stdexcept>
#include <string>

namespace onebit {

/// Inputs whose shapes do not agree.
class DimensionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Covariance or configuration values outside their admissible range.
class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// The sign-output covariance could not be factorized, even after the
/// jitter retry.
class NumericalBreakdown : public std::runtime_error
{
public:
  NumericalBreakdown(int iteration, double condition)
    : std::runtime_error("numerical breakdown at iteration " + std::to_string(iteration) +
                         " (condition estimate " + std::to_string(condition) + ")"),
      iteration_(iteration), condition_(condition)
  {}

  int iteration() const noexcept { return iteration_; }
  double condition() const noexcept { return condition_; }

private:
  int iteration_;
  double condition_;
};

}  // namespace onebit
