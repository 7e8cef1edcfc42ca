#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/format.hpp"
#include "sdde_bem/stepper.hpp"

namespace sdde {

/// Sup-norm of a segment. The interpolant is piecewise linear and |.| is
/// convex, so the maximum over the window is attained at a node.
inline double segment_sup_norm(const Segment& s) {
  double best = 0.0;
  for (std::size_t i = 0; i < s.length(); ++i) best = std::max(best, detail::norm2(s.at(i)));
  return best;
}

/// One scalar observation per path at a fixed time.
class EmpiricalMarginal {
 public:
  EmpiricalMarginal(std::vector<double> samples, double time, std::string observable = "x")
      : samples_(std::move(samples)), time_(time), observable_(std::move(observable)) {
    if (samples_.empty()) throw UsageError("EmpiricalMarginal: no samples");
    for (double v : samples_)
      if (!std::isfinite(v)) throw UsageError("EmpiricalMarginal: non-finite sample");
  }

  std::span<const double> samples() const noexcept { return samples_; }
  double time() const noexcept { return time_; }
  const std::string& observable() const noexcept { return observable_; }

 private:
  std::vector<double> samples_;
  double time_;
  std::string observable_;
};

/// Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)| with
/// right-continuous empirical CDFs. Both CDFs are advanced past every tied
/// value before the gap is measured.
inline double ks_statistic(const EmpiricalMarginal& a, const EmpiricalMarginal& b) {
  std::vector<double> xs(a.samples().begin(), a.samples().end());
  std::vector<double> ys(b.samples().begin(), b.samples().end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double na = static_cast<double>(xs.size()), nb = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double x = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] <= x) ++i;
    while (j < ys.size() && ys[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Paired segments from two runs driven by the same noise.
class CouplingSample {
 public:
  CouplingSample(std::vector<Segment> first, std::vector<Segment> second)
      : first_(std::move(first)), second_(std::move(second)) {
    if (first_.empty()) throw UsageError("CouplingSample: no pairs");
    if (first_.size() != second_.size()) throw UsageError("CouplingSample: path counts differ");
    for (std::size_t i = 0; i < first_.size(); ++i) {
      const auto &a = first_[i], &b = second_[i];
      if (a.window.size() != b.window.size() || a.d != b.d || a.delta != b.delta)
        throw UsageError("CouplingSample: segments differ in step or window length");
    }
  }

  std::size_t size() const noexcept { return first_.size(); }
  const Segment& first(std::size_t i) const { return first_[i]; }
  const Segment& second(std::size_t i) const { return second_[i]; }

 private:
  std::vector<Segment> first_, second_;
};

/// min(2, ||A - B||) for one pair of segments.
inline double clamped_segment_distance(const Segment& a, const Segment& b) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.length(); ++i) {
    auto u = a.at(i), v = b.at(i);
    double s = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) s += (u[c] - v[c]) * (u[c] - v[c]);
    best = std::max(best, std::sqrt(s));
  }
  return std::min(2.0, best);
}

/// Mean of min(2, ||A_i - B_i||): an upper bound on the bounded-Lipschitz
/// distance between the two segment laws under this coupling.
inline double dL_coupled_bound(const CouplingSample& c) {
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) sum += clamped_segment_distance(c.first(i), c.second(i));
  return sum / static_cast<double>(c.size());
}

using Observable = std::function<double(std::span<const double>)>;

struct NamedObservable {
  std::string name;
  Observable fn;
};

/// Observables by name: "x", "cube" (x^3), "exp-neg" (e^{-x}), "constant:<c>".
/// All act on the first state component.
inline NamedObservable named_observable(std::string_view name) {
  if (name == "x") return {"x", [](std::span<const double> x) { return x[0]; }};
  if (name == "cube") return {"cube", [](std::span<const double> x) { return x[0] * x[0] * x[0]; }};
  if (name == "exp-neg") return {"exp-neg", [](std::span<const double> x) { return std::exp(-x[0]); }};
  constexpr std::string_view prefix = "constant:";
  if (name.starts_with(prefix)) {
    const std::string text(name.substr(prefix.size()));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (text.empty() || used != text.size()) throw UsageError("bad constant observable '" + std::string(name) + "'");
    return {std::string(name), [v](std::span<const double>) { return v; }};
  }
  throw UsageError("unknown observable '" + std::string(name) + "' (expected x, cube, exp-neg or constant:<c>)");
}

/// (1/k) * sum_{i=1..k} observable(X_i).
inline double time_average(const Trajectory& traj, const Observable& observable, std::int64_t k) {
  if (k < 1 || k > traj.grid().steps())
    throw UsageError("time_average: k=" + std::to_string(k) + " outside [1, N]");
  double sum = 0.0;
  for (std::int64_t i = 1; i <= k; ++i) sum += observable(traj.node(i));
  return sum / static_cast<double>(k);
}

/// Running time averages A_1..A_N (element k-1 holds A_k).
inline std::vector<double> time_average_series(const Trajectory& traj, const Observable& observable) {
  const std::int64_t n = traj.grid().steps();
  std::vector<double> out(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (std::int64_t i = 1; i <= n; ++i) {
    sum += observable(traj.node(i));
    out[static_cast<std::size_t>(i - 1)] = sum / static_cast<double>(i);
  }
  return out;
}

/// |X_k|^p for k = 0..N of one path.
inline std::vector<double> path_moments(const Trajectory& traj, double p) {
  const std::int64_t n = traj.grid().steps();
  std::vector<double> out(static_cast<std::size_t>(n + 1));
  for (std::int64_t k = 0; k <= n; ++k) out[static_cast<std::size_t>(k)] = std::pow(detail::norm2(traj.node(k)), p);
  return out;
}

/// Monte Carlo estimate of E|X_k|^p for k = 0..N, summed in path order.
inline std::vector<double> moment_track(std::span<const Trajectory> trajectories, double p) {
  if (trajectories.empty()) throw UsageError("moment_track: no trajectories");
  if (!(p > 0.0)) throw UsageError("moment_track: p must be positive");
  const TimeGrid& grid = trajectories.front().grid();
  std::vector<double> sum(static_cast<std::size_t>(grid.steps() + 1), 0.0);
  for (const auto& traj : trajectories) {
    if (!(traj.grid() == grid)) throw UsageError("moment_track: trajectories on different grids");
    const auto m = path_moments(traj, p);
    for (std::size_t k = 0; k < m.size(); ++k) sum[k] += m[k];
  }
  for (double& v : sum) v /= static_cast<double>(trajectories.size());
  return sum;
}

/// Running maximum of a series.
inline std::vector<double> running_sup(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

/// One point of an exported statistic series.
struct SeriesPoint {
  std::int64_t k = 0;
  double t = 0.0;
  double value = 0.0;
};

inline void write_series_csv(std::ostream& os, std::span<const SeriesPoint> series, std::string_view value_name = "value") {
  os << "k,t," << value_name << '\n';
  for (const auto& p : series) os << p.k << ',' << format_double(p.t) << ',' << format_double(p.value) << '\n';
}

}  // namespace sdde
