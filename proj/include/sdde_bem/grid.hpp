#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/format.hpp"

namespace sdde {

/// Uniform grid tied to the delay: step = tau / M, nodes t_k = k * step for
/// k in [-M, N]. The step is always derived, never stored.
class TimeGrid {
 public:
  TimeGrid(double tau, std::int64_t substeps, std::int64_t steps) : tau_(tau), m_(substeps), n_(steps) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("TimeGrid: tau must be positive and finite");
    if (substeps < 1) throw UsageError("TimeGrid: M must be >= 1");
    if (steps < 0) throw UsageError("TimeGrid: N must be >= 0");
  }

  /// Builds the grid for step `delta` and horizon `horizon`; both tau/delta and
  /// horizon/delta must be integers (relative tolerance 1e-9).
  static TimeGrid from_step(double tau, double delta, double horizon) {
    if (!(delta > 0.0)) throw UsageError("step must be positive, got " + format_double(delta));
    if (!(horizon >= 0.0)) throw UsageError("horizon must be nonnegative, got " + format_double(horizon));
    const std::int64_t m = checked_ratio(tau, delta, "tau");
    const std::int64_t n = horizon == 0.0 ? 0 : checked_ratio(horizon, delta, "horizon");
    return TimeGrid(tau, m, n);
  }

  double tau() const noexcept { return tau_; }
  std::int64_t substeps() const noexcept { return m_; }
  std::int64_t steps() const noexcept { return n_; }
  double delta() const noexcept { return tau_ / static_cast<double>(m_); }
  double horizon() const noexcept { return time(n_); }
  /// Number of stored nodes, M + N + 1.
  std::int64_t node_count() const noexcept { return m_ + n_ + 1; }

  double time(std::int64_t k) const noexcept {
    if (k == -m_) return -tau_;
    return static_cast<double>(k) * delta();
  }

  /// Index of the node at time t; t must be a node time.
  std::int64_t index_of(double t) const {
    const double s = t / delta();
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-9 * std::max(1.0, std::abs(s)))
      throw UsageError("time " + format_double(t) + " is not a node of the grid with step " + format_double(delta()));
    const auto k = static_cast<std::int64_t>(r);
    if (k < -m_ || k > n_) throw UsageError("time " + format_double(t) + " outside grid range");
    return k;
  }

  /// Grid with step ratio * delta; ratio must divide both M and N.
  TimeGrid coarsened(std::int64_t ratio) const {
    if (ratio < 1) throw UsageError("coarsening ratio must be >= 1");
    if (m_ % ratio != 0 || n_ % ratio != 0)
      throw UsageError("coarsening ratio " + std::to_string(ratio) + " must divide M=" + std::to_string(m_) +
                       " and N=" + std::to_string(n_));
    return TimeGrid(tau_, m_ / ratio, n_ / ratio);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  static std::int64_t checked_ratio(double num, double den, const char* what) {
    const double s = num / den;
    const double r = std::round(s);
    if (r < 1.0 || std::abs(s - r) > 1e-9 * r)
      throw UsageError(std::string(what) + "=" + format_double(num) + " is not an integer multiple of step " +
                       format_double(den));
    return static_cast<std::int64_t>(r);
  }

  double tau_;
  std::int64_t m_;
  std::int64_t n_;
};

/// Integer ratio coarse/fine between two steps, or UsageError.
inline std::int64_t step_ratio(double fine, double coarse) {
  if (!(fine > 0.0) || !(coarse > 0.0)) throw UsageError("steps must be positive");
  const double s = coarse / fine;
  const double r = std::round(s);
  if (r < 1.0 || std::abs(s - r) > 1e-9 * r)
    throw UsageError("step " + format_double(coarse) + " is not an integer multiple of " + format_double(fine));
  return static_cast<std::int64_t>(r);
}

}  // namespace sdde
