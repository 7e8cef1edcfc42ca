#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/format.hpp"

namespace sdde {

/// A point in R^d. Entries are finite by construction.
class StateVec {
 public:
  StateVec() = default;
  explicit StateVec(std::vector<double> values) : values_(std::move(values)) { check(); }
  StateVec(std::initializer_list<double> values) : values_(values) { check(); }
  explicit StateVec(std::span<const double> values) : values_(values.begin(), values.end()) { check(); }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const StateVec&, const StateVec&) = default;

 private:
  void check() const {
    for (double v : values_)
      if (!std::isfinite(v)) throw UsageError("StateVec entries must be finite");
  }
  std::vector<double> values_;
};

/// Dense row-major matrix; used for d x m diffusion values and d x d Jacobians.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

// Coefficients write into caller-provided storage so the stepper's hot loop
// does not allocate.
using DriftFn = std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)>;
using DiffusionFn = DriftFn;  // out is d*m, row-major
using JacobianFn = DriftFn;   // out is d*d, row-major, d f_i / d x_j
using HistoryFn = std::function<void(double t, std::span<double> out)>;
using SplitFn = std::function<void(std::span<const double> x, std::span<double> out)>;  // out is d*m

/// Diffusion split g(x, y) ~ (g1(x), g2(y)) used by the diffusion audit.
struct DiffusionSplit {
  SplitFn g1;
  SplitFn g2;
};

/// dx = f(x(t), x(t - tau)) dt + g(x(t), x(t - tau)) dW(t) with x = history on [-tau, 0].
/// Coefficient callables must be pure and reentrant.
struct SddeModel {
  std::string name;
  std::size_t d = 1;
  std::size_t m = 1;
  double tau = 1.0;
  DriftFn drift;
  DiffusionFn diffusion;
  JacobianFn drift_jacobian_x;  // optional
  HistoryFn initial_history;
  std::optional<DiffusionSplit> split;

  bool has_jacobian() const noexcept { return static_cast<bool>(drift_jacobian_x); }
};

inline void validate_model(const SddeModel& model) {
  if (model.d == 0 || model.m == 0) throw UsageError("model '" + model.name + "': d and m must be positive");
  if (!(model.tau > 0.0) || !std::isfinite(model.tau))
    throw UsageError("model '" + model.name + "': tau must be positive");
  if (!model.drift || !model.diffusion || !model.initial_history)
    throw UsageError("model '" + model.name + "': drift, diffusion and initial history are required");
}

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

inline void check_dims(const SddeModel& model, std::span<const double> x, std::span<const double> y) {
  if (x.size() != model.d || y.size() != model.d)
    throw UsageError("model '" + model.name + "': expected state dimension " + std::to_string(model.d) + ", got " +
                     std::to_string(x.size()) + " and " + std::to_string(y.size()));
}

[[noreturn]] inline void throw_nonfinite(const SddeModel& model, const char* what, std::span<const double> x,
                                         std::span<const double> y) {
  throw ModelEvalError("model '" + model.name + "': non-finite " + what + " at x=" + format_vector(x) +
                       ", y=" + format_vector(y));
}

}  // namespace detail

inline StateVec eval_drift(const SddeModel& model, const StateVec& x, const StateVec& y) {
  detail::check_dims(model, x.span(), y.span());
  std::vector<double> out(model.d);
  model.drift(x.span(), y.span(), out);
  if (!detail::all_finite(out)) detail::throw_nonfinite(model, "drift", x.span(), y.span());
  return StateVec(std::move(out));
}

inline Matrix eval_diffusion(const SddeModel& model, const StateVec& x, const StateVec& y) {
  detail::check_dims(model, x.span(), y.span());
  Matrix out(model.d, model.m);
  model.diffusion(x.span(), y.span(), out.data);
  if (!detail::all_finite(out.data)) detail::throw_nonfinite(model, "diffusion", x.span(), y.span());
  return out;
}

/// d f / d x at (x, y): the analytic Jacobian when present, otherwise central
/// differences with step h * (1 + |x_j|).
inline Matrix eval_drift_jacobian(const SddeModel& model, const StateVec& x, const StateVec& y,
                                  double h = 1.4901161193847656e-08) {
  detail::check_dims(model, x.span(), y.span());
  const std::size_t d = model.d;
  Matrix jac(d, d);
  if (model.has_jacobian()) {
    model.drift_jacobian_x(x.span(), y.span(), jac.data);
  } else {
    std::vector<double> xp(x.values()), fp(d), fm(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double step = h * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + step;
      model.drift(xp, y.span(), fp);
      xp[j] = x[j] - step;
      model.drift(xp, y.span(), fm);
      xp[j] = x[j];
      for (std::size_t i = 0; i < d; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * step);
    }
  }
  if (!detail::all_finite(jac.data)) detail::throw_nonfinite(model, "drift Jacobian", x.span(), y.span());
  return jac;
}

/// Initial history at t in [-tau, 0]. Times within 1e-12 * tau outside the
/// interval are clamped so grid nodes computed in floating point are accepted.
inline StateVec eval_initial(const SddeModel& model, double t) {
  const double slack = 1e-12 * model.tau;
  if (!(t >= -model.tau - slack && t <= slack))
    throw UsageError("initial history is defined on [-" + format_double(model.tau) + ", 0], got t=" +
                     format_double(t));
  t = std::clamp(t, -model.tau, 0.0);
  std::vector<double> out(model.d);
  model.initial_history(t, out);
  if (!detail::all_finite(out))
    throw ModelEvalError("model '" + model.name + "': non-finite initial history at t=" + format_double(t));
  return StateVec(std::move(out));
}

}  // namespace sdde
