#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdde_bem/brownian.hpp"
#include "sdde_bem/builtin_models.hpp"
#include "sdde_bem/errors.hpp"
#include "sdde_bem/grid.hpp"
#include "sdde_bem/model.hpp"
#include "sdde_bem/parallel.hpp"
#include "sdde_bem/segment_stats.hpp"
#include "sdde_bem/stepper.hpp"

namespace sdde {

// Every experiment computes per-path results on the worker pool into slots
// indexed by path, then reduces them in path order. Reports therefore depend
// only on the configuration, never on the thread count.

namespace detail {

template <class Result, class Fn>
std::vector<Result> map_paths(std::size_t first, std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<Result> out(count);
  parallel_for(count, threads, [&](std::size_t i) { out[i] = fn(first + i); });
  return out;
}

inline void require_paths(std::size_t paths) {
  if (paths < 1) throw UsageError("path count must be >= 1");
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strong error along time: fine reference vs coarse run on the same path.

struct StrongErrorConfig {
  double horizon = 20.0;
  double delta_ref = 1e-3;
  double delta = 1e-2;
  std::size_t paths = 200;
  std::uint64_t seed = 42;
  /// Coarse-grid nodes between checkpoints; 0 means one delay (M coarse steps).
  std::int64_t checkpoint_stride = 0;
  unsigned threads = 1;
  ImplicitSolveConfig solver;
};

struct StrongErrorPoint {
  std::int64_t k = 0;  // coarse node index
  double t = 0.0;
  double e_strong = 0.0;  // mean |x_ref(t) - X(t)|^2
  double ratio = 0.0;     // e_strong / delta
};

struct StrongErrorReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double delta_ref = 0.0;
  double delta = 0.0;
  double horizon = 0.0;
  std::int64_t checkpoint_stride = 0;
  std::vector<StrongErrorPoint> points;
};

inline StrongErrorReport run_strong_error(const SddeModel& model, const StrongErrorConfig& cfg) {
  validate_model(model);
  detail::require_paths(cfg.paths);
  cfg.solver.validate();
  const TimeGrid fine = TimeGrid::from_step(model.tau, cfg.delta_ref, cfg.horizon);
  const std::int64_t ratio = step_ratio(cfg.delta_ref, cfg.delta);
  const TimeGrid coarse = fine.coarsened(ratio);
  const std::int64_t stride = cfg.checkpoint_stride == 0 ? coarse.substeps() : cfg.checkpoint_stride;
  if (stride < 1) throw UsageError("checkpoint stride must be >= 1");

  std::vector<std::int64_t> checkpoints;
  for (std::int64_t k = 0; k <= coarse.steps(); k += stride) checkpoints.push_back(k);

  auto per_path = detail::map_paths<std::vector<double>>(0, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, fine, model.m);
    const auto reference = integrate(model, fine, inc, cfg.solver, p);
    const auto coarse_inc = coarsen_increments(inc, model.m, static_cast<std::size_t>(ratio));
    const auto approx = integrate(model, coarse, coarse_inc, cfg.solver, p);
    std::vector<double> sq(checkpoints.size());
    for (std::size_t j = 0; j < checkpoints.size(); ++j)
      sq[j] = detail::sq_dist(reference.node(checkpoints[j] * ratio), approx.node(checkpoints[j]));
    return sq;
  });

  StrongErrorReport report{model.name, cfg.seed, cfg.paths, cfg.delta_ref, coarse.delta(), cfg.horizon, stride, {}};
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    double sum = 0.0;
    for (const auto& sq : per_path) sum += sq[j];
    const double e = sum / static_cast<double>(cfg.paths);
    report.points.push_back({checkpoints[j], coarse.time(checkpoints[j]), e, e / coarse.delta()});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Convergence rate: RMS error at the horizon for several steps, log-log fit.

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(error) = intercept + slope * log(delta).
inline LogLogFit fit_loglog(std::span<const double> deltas, std::span<const double> errors) {
  if (deltas.size() != errors.size() || deltas.size() < 2) throw UsageError("fit_loglog: need >= 2 matching points");
  const double n = static_cast<double>(deltas.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(errors[i]))
      throw UsageError("fit_loglog: steps and errors must be positive and finite");
    sx += std::log(deltas[i]);
    sy += std::log(errors[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double dx = std::log(deltas[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errors[i]) - my);
  }
  if (sxx == 0.0) throw UsageError("fit_loglog: steps must not all be equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct RateConfig {
  double horizon = 4.0;
  std::vector<double> deltas{1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  double delta_ref = 1.0 / 4096;
  std::size_t paths = 400;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  ImplicitSolveConfig solver;
};

struct RatePoint {
  double delta = 0.0;
  double rms = 0.0;
};

struct RateReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double delta_ref = 0.0;
  double horizon = 0.0;
  std::vector<RatePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Builds the report (points + fit) from already measured errors.
inline RateReport rate_report_from_errors(std::span<const double> deltas, std::span<const double> rms) {
  RateReport report;
  for (std::size_t i = 0; i < deltas.size(); ++i) report.points.push_back({deltas[i], rms[i]});
  const auto fit = fit_loglog(deltas, rms);
  report.slope = fit.slope;
  report.intercept = fit.intercept;
  return report;
}

inline RateReport run_rate_regression(const SddeModel& model, const RateConfig& cfg) {
  validate_model(model);
  detail::require_paths(cfg.paths);
  cfg.solver.validate();
  if (cfg.deltas.size() < 4)
    throw UsageError("rate regression needs at least 4 step sizes, got " + std::to_string(cfg.deltas.size()));
  const TimeGrid fine = TimeGrid::from_step(model.tau, cfg.delta_ref, cfg.horizon);
  std::vector<std::int64_t> ratios;
  std::vector<TimeGrid> grids;
  for (double delta : cfg.deltas) {
    ratios.push_back(step_ratio(cfg.delta_ref, delta));
    grids.push_back(fine.coarsened(ratios.back()));
  }

  auto per_path = detail::map_paths<std::vector<double>>(0, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, fine, model.m);
    const auto reference = integrate(model, fine, inc, cfg.solver, p);
    const auto final_ref = reference.node(fine.steps());
    std::vector<double> sq(grids.size());
    for (std::size_t i = 0; i < grids.size(); ++i) {
      const auto coarse_inc = coarsen_increments(inc, model.m, static_cast<std::size_t>(ratios[i]));
      const auto approx = integrate(model, grids[i], coarse_inc, cfg.solver, p);
      sq[i] = detail::sq_dist(final_ref, approx.node(grids[i].steps()));
    }
    return sq;
  });

  std::vector<double> deltas, rms;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    double sum = 0.0;
    for (const auto& sq : per_path) sum += sq[i];
    deltas.push_back(grids[i].delta());
    rms.push_back(std::sqrt(sum / static_cast<double>(cfg.paths)));
  }
  auto report = rate_report_from_errors(deltas, rms);
  report.model = model.name;
  report.seed = cfg.seed;
  report.paths = cfg.paths;
  report.delta_ref = cfg.delta_ref;
  report.horizon = cfg.horizon;
  return report;
}

// ---------------------------------------------------------------------------
// Invariant-measure study: marginal K-S against a long fine-grid reference, and
// the coupled bounded-Lipschitz bound between two initial histories.

struct InvariantConfig {
  double t_ref = 30.0;
  std::vector<double> compare_times{5, 10, 15, 20};
  std::size_t paths = 200;
  std::uint64_t seed = 42;
  double delta = 1e-2;
  double delta_ref = 1e-3;
  NamedHistory alt_history = constant_history(-2.0);
  /// Reference sample drawn from path indices [paths, 2 paths) instead of [0, paths).
  bool disjoint_blocks = true;
  unsigned threads = 1;
  ImplicitSolveConfig solver;
};

struct KsPoint {
  double t = 0.0;
  double ks = 0.0;
};

struct InvariantReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double delta = 0.0;
  double delta_ref = 0.0;
  double t_ref = 0.0;
  std::string alt_history;
  std::vector<KsPoint> ks;
  std::vector<SeriesPoint> dl_bound;  // at t = j * tau
};

inline InvariantReport run_invariant_study(const SddeModel& model, const InvariantConfig& cfg) {
  validate_model(model);
  detail::require_paths(cfg.paths);
  cfg.solver.validate();
  if (cfg.compare_times.empty()) throw UsageError("invariant study needs at least one compare time");
  if (!cfg.alt_history.fn) throw UsageError("invariant study needs an alternative history");
  const double t_max = *std::max_element(cfg.compare_times.begin(), cfg.compare_times.end());
  const TimeGrid grid = TimeGrid::from_step(model.tau, cfg.delta, t_max);
  const TimeGrid ref_grid = TimeGrid::from_step(model.tau, cfg.delta_ref, cfg.t_ref);
  std::vector<std::int64_t> compare_idx;
  for (double t : cfg.compare_times) {
    if (!(t > 0.0) || t > cfg.t_ref * (1 + 1e-12))
      throw UsageError("compare time " + format_double(t) + " must lie in (0, t_ref]");
    compare_idx.push_back(grid.index_of(t));
  }
  std::vector<std::int64_t> dl_idx;
  for (std::int64_t k = 0; k <= grid.steps(); k += grid.substeps()) dl_idx.push_back(k);

  const SddeModel alt = with_history(model, cfg.alt_history);
  struct PathResult {
    std::vector<double> values;
    std::vector<double> distances;
  };
  auto block = detail::map_paths<PathResult>(0, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, grid, model.m);
    const auto x = integrate(model, grid, inc, cfg.solver, p);
    const auto y = integrate(alt, grid, inc, cfg.solver, p);
    PathResult r;
    for (auto k : compare_idx) r.values.push_back(x.value(k));
    for (auto k : dl_idx) r.distances.push_back(clamped_segment_distance(extract_segment(x, k), extract_segment(y, k)));
    return r;
  });
  const std::size_t ref_first = cfg.disjoint_blocks ? cfg.paths : 0;
  auto reference = detail::map_paths<double>(ref_first, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, ref_grid, model.m);
    return integrate(model, ref_grid, inc, cfg.solver, p).value(ref_grid.steps());
  });

  InvariantReport report{model.name, cfg.seed, cfg.paths, cfg.delta, cfg.delta_ref, cfg.t_ref,
                         cfg.alt_history.name, {}, {}};
  const EmpiricalMarginal ref_marginal(reference, cfg.t_ref);
  for (std::size_t j = 0; j < compare_idx.size(); ++j) {
    std::vector<double> samples;
    for (const auto& r : block) samples.push_back(r.values[j]);
    report.ks.push_back({cfg.compare_times[j], ks_statistic(EmpiricalMarginal(samples, cfg.compare_times[j]), ref_marginal)});
  }
  for (std::size_t j = 0; j < dl_idx.size(); ++j) {
    double sum = 0.0;
    for (const auto& r : block) sum += r.distances[j];
    report.dl_bound.push_back({dl_idx[j], grid.time(dl_idx[j]), sum / static_cast<double>(cfg.paths)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ergodicity: Monte Carlo means of running time averages from several initial
// histories, all driven by the same noise paths.

struct ErgodicityConfig {
  double horizon = 30.0;
  double delta = 1e-2;
  std::size_t paths = 200;
  std::uint64_t seed = 42;
  std::vector<NamedHistory> initials;
  std::vector<NamedObservable> observables;
  /// Nodes between reported curve points; 0 means one delay.
  std::int64_t sample_stride = 0;
  unsigned threads = 1;
  ImplicitSolveConfig solver;
};

struct ErgodicityCurve {
  std::string initial;
  std::string observable;
  std::vector<SeriesPoint> points;
};

struct SpreadEntry {
  std::string observable;
  double spread = 0.0;
};

struct ErgodicityReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double delta = 0.0;
  double horizon = 0.0;
  std::vector<ErgodicityCurve> curves;  // initial-major
  std::vector<SpreadEntry> terminal_spread;
};

inline ErgodicityReport run_ergodicity(const SddeModel& model, const ErgodicityConfig& cfg) {
  validate_model(model);
  detail::require_paths(cfg.paths);
  cfg.solver.validate();
  if (cfg.initials.size() < 2) throw UsageError("ergodicity needs at least 2 initial histories");
  if (cfg.observables.empty()) throw UsageError("ergodicity needs at least one observable");
  const TimeGrid grid = TimeGrid::from_step(model.tau, cfg.delta, cfg.horizon);
  if (grid.steps() < 1) throw UsageError("ergodicity horizon must cover at least one step");
  const std::int64_t stride = cfg.sample_stride == 0 ? grid.substeps() : cfg.sample_stride;
  if (stride < 1) throw UsageError("sample stride must be >= 1");
  std::vector<std::int64_t> sample_idx;
  for (std::int64_t k = stride; k <= grid.steps(); k += stride) sample_idx.push_back(k);
  if (sample_idx.empty() || sample_idx.back() != grid.steps()) sample_idx.push_back(grid.steps());

  std::vector<SddeModel> models;
  for (const auto& h : cfg.initials) models.push_back(with_history(model, h));
  const std::size_t n_curves = models.size() * cfg.observables.size();

  auto per_path = detail::map_paths<std::vector<double>>(0, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, grid, model.m);
    std::vector<double> out;
    out.reserve(n_curves * sample_idx.size());
    for (const auto& m : models) {
      const auto traj = integrate(m, grid, inc, cfg.solver, p);
      for (const auto& obs : cfg.observables) {
        const auto avg = time_average_series(traj, obs.fn);
        for (auto k : sample_idx) out.push_back(avg[static_cast<std::size_t>(k - 1)]);
      }
    }
    return out;
  });

  ErgodicityReport report{model.name, cfg.seed, cfg.paths, cfg.delta, cfg.horizon, {}, {}};
  std::size_t offset = 0;
  for (const auto& h : cfg.initials) {
    for (const auto& obs : cfg.observables) {
      ErgodicityCurve curve{h.name, obs.name, {}};
      for (std::size_t j = 0; j < sample_idx.size(); ++j) {
        double sum = 0.0;
        for (const auto& r : per_path) sum += r[offset + j];
        curve.points.push_back({sample_idx[j], grid.time(sample_idx[j]), sum / static_cast<double>(cfg.paths)});
      }
      offset += sample_idx.size();
      report.curves.push_back(std::move(curve));
    }
  }
  for (std::size_t o = 0; o < cfg.observables.size(); ++o) {
    double spread = 0.0;
    for (std::size_t a = 0; a < cfg.initials.size(); ++a)
      for (std::size_t b = a + 1; b < cfg.initials.size(); ++b) {
        const double va = report.curves[a * cfg.observables.size() + o].points.back().value;
        const double vb = report.curves[b * cfg.observables.size() + o].points.back().value;
        spread = std::max(spread, std::abs(va - vb));
      }
    report.terminal_spread.push_back({cfg.observables[o].name, spread});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Moment tracking: E|X_k|^p at every node.

struct MomentConfig {
  double horizon = 50.0;
  double delta = 1e-2;
  std::size_t paths = 200;
  std::uint64_t seed = 42;
  double p = 2.0;
  unsigned threads = 1;
  ImplicitSolveConfig solver;
};

struct MomentReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double delta = 0.0;
  double horizon = 0.0;
  double p = 0.0;
  std::vector<SeriesPoint> moments;  // k = 0..N
};

inline MomentReport run_moment_track(const SddeModel& model, const MomentConfig& cfg) {
  validate_model(model);
  detail::require_paths(cfg.paths);
  cfg.solver.validate();
  if (!(cfg.p > 0.0)) throw UsageError("moment exponent must be positive");
  const TimeGrid grid = TimeGrid::from_step(model.tau, cfg.delta, cfg.horizon);
  auto per_path = detail::map_paths<std::vector<double>>(0, cfg.paths, cfg.threads, [&](std::size_t p) {
    const auto inc = path_increments(cfg.seed, p, grid, model.m);
    return path_moments(integrate(model, grid, inc, cfg.solver, p), cfg.p);
  });
  MomentReport report{model.name, cfg.seed, cfg.paths, cfg.delta, cfg.horizon, cfg.p, {}};
  for (std::int64_t k = 0; k <= grid.steps(); ++k) {
    double sum = 0.0;
    for (const auto& m : per_path) sum += m[static_cast<std::size_t>(k)];
    report.moments.push_back({k, grid.time(k), sum / static_cast<double>(cfg.paths)});
  }
  return report;
}

}  // namespace sdde
