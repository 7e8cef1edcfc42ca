#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/format.hpp"
#include "sdde_bem/grid.hpp"
#include "sdde_bem/model.hpp"

namespace sdde {

struct ImplicitSolveConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_newton_iters = 50;
  int max_bisection_iters = 200;
  /// Relative finite-difference step; scaled by 1 + |x_j| per coordinate.
  double fd_jacobian_step = 1.4901161193847656e-08;
  /// Step halvings tried when a full Newton step does not reduce the residual.
  int max_damping_halvings = 6;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(fd_jacobian_step > 0.0))
      throw UsageError("solver tolerances and finite-difference step must be positive");
    if (max_newton_iters < 1 || max_bisection_iters < 1)
      throw UsageError("solver iteration caps must be >= 1");
    if (max_damping_halvings < 0) throw UsageError("damping halvings must be >= 0");
  }
};

struct SolveOutcome {
  int newton_iters = 0;
  int bisection_iters = 0;
  double residual = 0.0;
  bool used_bisection = false;
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

/// Solves a * x = b in place (a is n x n row-major, overwritten; b becomes x).
/// Returns false on a zero or non-finite pivot.
inline bool solve_linear(std::span<double> a, std::span<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    const double p = a[piv * n + col];
    if (p == 0.0 || !std::isfinite(p)) return false;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[piv * n + j], a[col * n + j]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / p;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a[r * n + j] -= factor * a[col * n + j];
      b[r] -= factor * b[col];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * b[j];
    b[i] = s / a[i * n + i];
    if (!std::isfinite(b[i])) return false;
  }
  return true;
}

}  // namespace detail

/// Solves z = c + delta * f(z, y) for one implicit step. Owns its workspace, so
/// one instance per worker.
///
/// Newton's method (analytic Jacobian, else central differences) with residual
/// damping; if it stalls and d == 1 the scalar residual is bracketed and
/// bisected. Convergence means |z - c - delta f(z, y)| <= abs_tol +
/// rel_tol * max(|z|, |c|).
class ImplicitSolver {
 public:
  ImplicitSolver(const SddeModel& model, ImplicitSolveConfig cfg) : model_(model), cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = model.d;
    r_.resize(d);
    r_try_.resize(d);
    z_try_.resize(d);
    dz_.resize(d);
    f_.resize(d);
    fp_.resize(d);
    fm_.resize(d);
    x_shift_.resize(d);
    jac_.resize(d * d);
  }

  /// `z` holds the initial guess on entry and the root on return. `step` is
  /// only used to label failures.
  SolveOutcome solve(std::span<const double> y, std::span<const double> c, double delta, std::span<double> z,
                     std::int64_t step = 0) {
    const std::size_t d = model_.d;
    SolveOutcome out;
    const double c_norm = detail::norm2(c);
    auto tolerance = [&](std::span<const double> zz) {
      return cfg_.abs_tol + cfg_.rel_tol * std::max(detail::norm2(zz), c_norm);
    };

    // The guess is only accepted untouched when it is an exact root: with a
    // small state the absolute tolerance would otherwise freeze the iteration.
    double res = residual(z, y, c, delta, r_);
    bool converged = res == 0.0;
    while (!converged && std::isfinite(res) && out.newton_iters < cfg_.max_newton_iters) {
      ++out.newton_iters;
      jacobian(z, y);
      for (std::size_t i = 0; i < d * d; ++i) jac_[i] *= -delta;
      for (std::size_t i = 0; i < d; ++i) {
        jac_[i * d + i] += 1.0;
        dz_[i] = -r_[i];
      }
      if (!detail::solve_linear(jac_, dz_)) break;

      double lambda = 1.0;
      bool accepted = false;
      for (int h = 0; h <= cfg_.max_damping_halvings; ++h, lambda *= 0.5) {
        for (std::size_t i = 0; i < d; ++i) z_try_[i] = z[i] + lambda * dz_[i];
        const double trial = residual(z_try_, y, c, delta, r_try_);
        if (std::isfinite(trial) && trial < res) {
          std::copy(z_try_.begin(), z_try_.end(), z.begin());
          std::swap(r_, r_try_);
          res = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      converged = res <= tolerance(z);
    }
    converged = converged || (std::isfinite(res) && res <= tolerance(z));
    out.residual = res;
    if (converged) return out;

    if (d != 1)
      throw StepFailure(step, res, out.newton_iters,
                        "implicit step " + std::to_string(step) + " did not converge (residual " +
                            format_double(res) + " after " + std::to_string(out.newton_iters) + " Newton iterations)");
    out.used_bisection = true;
    bisect(y, c, delta, z, step, out);
    return out;
  }

  const ImplicitSolveConfig& config() const noexcept { return cfg_; }

 private:
  double residual(std::span<const double> z, std::span<const double> y, std::span<const double> c, double delta,
                  std::span<double> r) {
    model_.drift(z, y, f_);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = z[i] - c[i] - delta * f_[i];
      s += r[i] * r[i];
    }
    return std::sqrt(s);
  }

  void jacobian(std::span<const double> z, std::span<const double> y) {
    if (model_.has_jacobian()) {
      model_.drift_jacobian_x(z, y, jac_);
      return;
    }
    const std::size_t d = model_.d;
    std::copy(z.begin(), z.end(), x_shift_.begin());
    for (std::size_t j = 0; j < d; ++j) {
      const double h = cfg_.fd_jacobian_step * (1.0 + std::abs(z[j]));
      x_shift_[j] = z[j] + h;
      model_.drift(x_shift_, y, fp_);
      x_shift_[j] = z[j] - h;
      model_.drift(x_shift_, y, fm_);
      x_shift_[j] = z[j];
      for (std::size_t i = 0; i < d; ++i) jac_[i * d + j] = (fp_[i] - fm_[i]) / (2.0 * h);
    }
  }

  void bisect(std::span<const double> y, std::span<const double> c, double delta, std::span<double> z,
              std::int64_t step, SolveOutcome& out) {
    const double c0 = c[0];
    double point[1];
    double rbuf[1];
    auto signed_residual = [&](double v) {
      point[0] = v;
      residual(point, y, c, delta, rbuf);
      return rbuf[0];
    };
    auto tolerance = [&](double v) { return cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(v), std::abs(c0)); };
    auto fail = [&](double res, const std::string& why) {
      throw StepFailure(step, res, out.newton_iters + out.bisection_iters,
                        "implicit step " + std::to_string(step) + " failed: " + why + " (residual " +
                            format_double(res) + ")");
    };

    // The residual is increasing in z for a dissipative drift; grow a bracket
    // around the origin until it changes sign.
    model_.drift(c, y, f_);
    double bound = std::abs(c0) + delta * std::abs(f_[0]) + 1.0;
    if (!std::isfinite(bound)) bound = std::abs(c0) + 1.0;
    double lo = -bound, hi = bound;
    double r_lo = signed_residual(lo), r_hi = signed_residual(hi);
    // A strict sign change is required: far from the origin z - c - delta f(z)
    // can round to exactly zero without a root nearby.
    for (int i = 0; i < 1100 && !(r_lo < 0.0 && r_hi > 0.0); ++i) {
      if (!std::isfinite(r_lo) || !std::isfinite(r_hi)) break;
      if (r_lo >= 0.0) r_lo = signed_residual(lo *= 2.0);
      if (r_hi <= 0.0) r_hi = signed_residual(hi *= 2.0);
    }
    if (!(r_lo < 0.0 && r_hi > 0.0)) fail(out.residual, "no sign change found for bisection bracket");

    double best = std::abs(r_lo) < std::abs(r_hi) ? lo : hi;
    double best_res = std::min(std::abs(r_lo), std::abs(r_hi));
    while (best_res > tolerance(best) && out.bisection_iters < cfg_.max_bisection_iters) {
      ++out.bisection_iters;
      const double mid = lo + 0.5 * (hi - lo);
      if (mid <= lo || mid >= hi) break;
      const double r_mid = signed_residual(mid);
      if (std::abs(r_mid) < best_res) {
        best = mid;
        best_res = std::abs(r_mid);
      }
      if (r_mid < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    out.residual = best_res;
    if (best_res > tolerance(best)) fail(best_res, "bisection did not reach tolerance");
    z[0] = best;
  }

  SddeModel model_;
  ImplicitSolveConfig cfg_;
  std::vector<double> r_, r_try_, z_try_, dz_, f_, fp_, fm_, x_shift_, jac_;
};

/// One implicit step z = c + delta * f(z, y_delay) starting from z0.
inline StateVec implicit_step_solve(const SddeModel& model, const StateVec& y_delay, const StateVec& c, double delta,
                                    const ImplicitSolveConfig& cfg, const StateVec& z0) {
  validate_model(model);
  if (!(delta > 0.0)) throw UsageError("implicit_step_solve: delta must be positive");
  if (y_delay.size() != model.d || c.size() != model.d || z0.size() != model.d)
    throw UsageError("implicit_step_solve: dimension mismatch");
  ImplicitSolver solver(model, cfg);
  std::vector<double> z(z0.values());
  solver.solve(y_delay.span(), c.span(), delta, z);
  return StateVec(std::move(z));
}

/// Node values X_{-M..N} of one backward Euler-Maruyama run, plus the history
/// function so the continuous extension is exact on [-tau, 0].
class Trajectory {
 public:
  Trajectory(TimeGrid grid, std::size_t d, std::vector<double> nodes, HistoryFn history, std::string model_name,
             std::size_t path_index)
      : grid_(grid),
        d_(d),
        nodes_(std::move(nodes)),
        history_(std::move(history)),
        model_name_(std::move(model_name)),
        path_index_(path_index) {
    if (nodes_.size() != static_cast<std::size_t>(grid_.node_count()) * d_)
      throw UsageError("Trajectory: node array has wrong size");
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return d_; }
  const std::string& model_name() const noexcept { return model_name_; }
  std::size_t path_index() const noexcept { return path_index_; }
  const HistoryFn& history() const noexcept { return history_; }

  /// X_k for k in [-M, N].
  std::span<const double> node(std::int64_t k) const {
    if (k < -grid_.substeps() || k > grid_.steps())
      throw UsageError("node index " + std::to_string(k) + " outside [-M, N]");
    return std::span<const double>(nodes_).subspan(offset(k), d_);
  }
  /// First component of X_k.
  double value(std::int64_t k) const { return node(k)[0]; }
  std::span<const double> raw() const noexcept { return nodes_; }

 private:
  std::size_t offset(std::int64_t k) const { return static_cast<std::size_t>(k + grid_.substeps()) * d_; }

  TimeGrid grid_;
  std::size_t d_;
  std::vector<double> nodes_;
  HistoryFn history_;
  std::string model_name_;
  std::size_t path_index_;
};

/// Runs the scheme
///   X_k = xi(t_k)                                                 k = -M..0
///   X_k = X_{k-1} + f(X_k, X_{k-M}) dt + g(X_{k-1}, X_{k-1-M}) dW_{k-1}   k >= 1
/// with `increments` holding dW_0..dW_{N-1} (N x m, row-major).
inline Trajectory integrate(const SddeModel& model, const TimeGrid& grid, std::span<const double> increments,
                            const ImplicitSolveConfig& cfg = {}, std::size_t path_index = 0) {
  validate_model(model);
  if (std::abs(grid.tau() - model.tau) > 1e-12 * model.tau)
    throw UsageError("grid tau does not match model '" + model.name + "'");
  const std::size_t d = model.d, m = model.m;
  const std::int64_t big_m = grid.substeps(), n = grid.steps();
  if (increments.size() != static_cast<std::size_t>(n) * m)
    throw UsageError("integrate: expected " + std::to_string(n * static_cast<std::int64_t>(m)) +
                     " increments, got " + std::to_string(increments.size()));

  std::vector<double> nodes(static_cast<std::size_t>(grid.node_count()) * d);
  auto at = [&](std::int64_t k) { return std::span<double>(nodes).subspan(static_cast<std::size_t>(k + big_m) * d, d); };
  for (std::int64_t k = -big_m; k <= 0; ++k) {
    auto x = at(k);
    model.initial_history(grid.time(k), x);
    if (!detail::all_finite(x))
      throw ModelEvalError("model '" + model.name + "': non-finite initial history at t=" + format_double(grid.time(k)));
  }

  ImplicitSolver solver(model, cfg);
  const double delta = grid.delta();
  std::vector<double> g(d * m), c(d);
  for (std::int64_t k = 1; k <= n; ++k) {
    auto prev = at(k - 1);
    auto lagged = at(std::max(k - 1 - big_m, -big_m));
    model.diffusion(prev, lagged, g);
    if (!detail::all_finite(g)) detail::throw_nonfinite(model, "diffusion", prev, lagged);
    const double* dw = increments.data() + static_cast<std::size_t>(k - 1) * m;
    for (std::size_t i = 0; i < d; ++i) {
      double s = prev[i];
      for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * dw[j];
      c[i] = s;
    }
    auto x = at(k);
    std::copy(prev.begin(), prev.end(), x.begin());
    solver.solve(at(k - big_m), c, delta, x, k);
    if (!detail::all_finite(x))
      throw StepFailure(k, std::numeric_limits<double>::quiet_NaN(), 0,
                        "implicit step " + std::to_string(k) + " produced a non-finite state");
  }
  return Trajectory(grid, d, std::move(nodes), model.initial_history, model.name, path_index);
}

/// Continuous extension: the history itself on [-tau, 0], linear between nodes
/// after 0. Exact node times return the node bitwise.
inline StateVec eval_continuous(const Trajectory& traj, double t) {
  const TimeGrid& grid = traj.grid();
  const double end = grid.horizon();
  const double slack = 1e-12 * std::max(grid.tau(), end);
  if (!(t >= -grid.tau() - slack && t <= end + slack))
    throw UsageError("eval_continuous: t=" + format_double(t) + " outside [-tau, N*delta]");
  const std::size_t d = traj.dim();
  if (t <= 0.0) {
    std::vector<double> out(d);
    traj.history()(std::max(t, -grid.tau()), out);
    return StateVec(std::move(out));
  }
  const double s = t / grid.delta();
  const double nearest = std::round(s);
  if (std::abs(s - nearest) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, s))
    return StateVec(traj.node(std::min(static_cast<std::int64_t>(nearest), grid.steps())));
  const auto k = std::min(static_cast<std::int64_t>(std::floor(s)), grid.steps() - 1);
  const double theta = s - static_cast<double>(k);
  auto a = traj.node(k), b = traj.node(k + 1);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = a[i] + theta * (b[i] - a[i]);
  return StateVec(std::move(out));
}

/// The delay window X_{k-M}..X_k.
struct Segment {
  std::int64_t base_index = 0;
  std::size_t d = 1;
  double delta = 0.0;
  std::vector<double> window;  // (M+1) * d, oldest first

  std::size_t length() const noexcept { return d == 0 ? 0 : window.size() / d; }
  std::span<const double> at(std::size_t i) const { return std::span<const double>(window).subspan(i * d, d); }
};

inline Segment extract_segment(const Trajectory& traj, std::int64_t k) {
  const TimeGrid& grid = traj.grid();
  if (k < 0 || k > grid.steps())
    throw UsageError("extract_segment: k=" + std::to_string(k) + " outside [0, " + std::to_string(grid.steps()) + "]");
  const std::size_t d = traj.dim();
  const auto first = traj.node(k - grid.substeps());
  Segment seg{k, d, grid.delta(), {}};
  seg.window.assign(first.data(), first.data() + static_cast<std::size_t>(grid.substeps() + 1) * d);
  return seg;
}

/// CSV with header `k,t,x1..xd` and one row per node k = -M..N.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "k,t";
  for (std::size_t i = 0; i < traj.dim(); ++i) os << ",x" << (i + 1);
  os << '\n';
  const TimeGrid& grid = traj.grid();
  for (std::int64_t k = -grid.substeps(); k <= grid.steps(); ++k) {
    os << k << ',' << format_double(grid.time(k));
    for (double v : traj.node(k)) os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace sdde
