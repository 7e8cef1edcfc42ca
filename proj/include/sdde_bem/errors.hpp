#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdde {

/// Invalid arguments or configuration: dimension mismatches, grids that do not
/// divide, out-of-range times. Maps to CLI exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model coefficient produced a non-finite value.
class ModelEvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The implicit solve did not converge in either the Newton or the bisection phase.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(std::int64_t step, double residual, int iterations, const std::string& what)
      : std::runtime_error(what), step_(step), residual_(residual), iterations_(iterations) {}

  std::int64_t step() const noexcept { return step_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::int64_t step_;
  double residual_;
  int iterations_;
};

}  // namespace sdde
