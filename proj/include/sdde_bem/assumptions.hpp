#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdde_bem/constants.hpp"
#include "sdde_bem/errors.hpp"
#include "sdde_bem/model.hpp"

namespace sdde {

/// Sampling domain for the auditor: every state argument ranges over
/// [-half_width, half_width]^d.
struct AuditConfig {
  double half_width = 2.0;
  std::size_t grid_points = 41;
  std::size_t random_samples = 10000;
  std::uint64_t seed = 1;
  /// A point counts as a violation when lhs - rhs > tolerance * (1 + |lhs| + |rhs|).
  double tolerance = 1e-9;
  /// Tensor grids larger than this many points are skipped (random samples only).
  std::size_t max_grid_size = 20'000'000;

  void validate() const {
    if (!(half_width > 0.0)) throw UsageError("audit: half_width must be positive");
    if (grid_points == 0 && random_samples == 0)
      throw UsageError("audit: at least one of grid_points and random_samples must be positive");
    if (!(tolerance >= 0.0)) throw UsageError("audit: tolerance must be nonnegative");
  }
};

/// Outcome for one sampled inequality. `worst_margin` is max(lhs - rhs) over
/// violating points when any exist, otherwise over all points.
struct AuditEntry {
  std::string id;
  std::string inequality;
  double worst_margin = -INFINITY;
  std::vector<double> worst_point{};  // (x, xbar, y, ybar) or (s, t)
  std::size_t samples = 0;
  std::size_t violations = 0;

  bool violated() const noexcept { return violations > 0; }
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  std::vector<HeaderCheck> headers;

  bool has_violation() const {
    for (const auto& e : entries)
      if (e.violated()) return true;
    for (const auto& h : headers)
      if (!h.holds()) return true;
    return false;
  }

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n = std::max(n, e.samples);
    return n;
  }

  std::string summary() const {
    if (!has_violation()) return "no violation found on " + std::to_string(sample_count()) + " samples";
    std::string out = "violations:";
    for (const auto& e : entries)
      if (e.violated()) out += " " + e.id;
    for (const auto& h : headers)
      if (!h.holds()) out += " [" + h.id + "]";
    return out;
  }

  void append(AuditReport other) {
    for (auto& e : other.entries) entries.push_back(std::move(e));
    for (auto& h : other.headers) headers.push_back(std::move(h));
  }
};

/// Both sides of one inequality at one point.
struct InequalityTerms {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin() const noexcept { return lhs - rhs; }
};

enum class Inequality {
  kDriftLipschitz,
  kDiffusionSplit,
  kG1Bound,
  kG2Bound,
  kDriftGrowth,
  kDiffusionGrowth,
  kMonotonicity,
  kPStarLyapunov,
  kKhasminskii,
};

inline const char* inequality_id(Inequality which) {
  switch (which) {
    case Inequality::kDriftLipschitz: return "A1.drift_lipschitz";
    case Inequality::kDiffusionSplit: return "A1.diffusion_split";
    case Inequality::kG1Bound: return "A1.g1_bound";
    case Inequality::kG2Bound: return "A1.g2_bound";
    case Inequality::kDriftGrowth: return "A1.drift_growth";
    case Inequality::kDiffusionGrowth: return "A1.diffusion_growth";
    case Inequality::kMonotonicity: return "A2.monotonicity";
    case Inequality::kPStarLyapunov: return "A2.pstar_lyapunov";
    case Inequality::kKhasminskii: return "A2.khasminskii";
  }
  return "?";
}

inline const char* inequality_text(Inequality which) {
  switch (which) {
    case Inequality::kDriftLipschitz:
      return "|f(x,y)-f(xb,yb)| <= a1(1+|x|^(q-1)+|xb|^(q-1)+|y|^(q-1)+|yb|^(q-1))(|x-xb|+|y-yb|)";
    case Inequality::kDiffusionSplit: return "|g(x,y)-g(xb,yb)|^2 <= eps1|g1(x)-g1(xb)|^2 + eps2|g2(y)-g2(yb)|^2";
    case Inequality::kG1Bound: return "eps1|g1(x)-g1(xb)|^2 <= a2|x-xb|^2 + a4 V(x,xb)";
    case Inequality::kG2Bound: return "eps2|g2(y)-g2(yb)|^2 <= a3|y-yb|^2 + a5 V(y,yb)";
    case Inequality::kDriftGrowth: return "|f(x,y)| <= a6(1+|x|^q+|y|^q)";
    case Inequality::kDiffusionGrowth: return "|g(x,y)|^2 <= a7 + a8|x|^(q+1) + a9|y|^(q+1)";
    case Inequality::kMonotonicity: return "2<x-xb, f(x,y)-f(xb,yb)> <= -b1|x-xb|^2 + b2|y-yb|^2 - b3 V(x,xb)";
    case Inequality::kPStarLyapunov:
      return "(p*/2)|x|^(p*-2)(2<x,f> + (p*-1)|g|^2) <= b4 - b5|x|^p* + b6|y|^p* - b7|x|^(p*+q-1) + b8|y|^(p*+q-1)";
    case Inequality::kKhasminskii: return "2<x,f> + l2|g|^2 <= b9 - b10|x|^2 + b11|y|^2 - b12|x|^(q+1) + b13|y|^(q+1)";
  }
  return "?";
}

/// Evaluates the sampled inequalities at single points; owns scratch storage.
class InequalityEvaluator {
 public:
  InequalityEvaluator(const SddeModel& model, const AssumptionConstants& consts) : model_(model), c_(consts) {
    validate_model(model);
    if (!model.split && (consts.eps1 != 0.0 || consts.eps2 != 0.0))
      throw UsageError("model '" + model.name + "' has no diffusion split (g1, g2) but eps1 or eps2 is nonzero");
    const std::size_t d = model.d, m = model.m;
    f_.resize(d);
    fb_.resize(d);
    g_.resize(d * m);
    gb_.resize(d * m);
    h_.resize(d * m);
    hb_.resize(d * m);
  }

  /// V(x, y) = |x - y|^2 (|x|^(q-1) + |y|^(q-1)).
  double v_term(std::span<const double> x, std::span<const double> y) const {
    return dist2(x, y) * (std::pow(norm(x), c_.q - 1.0) + std::pow(norm(y), c_.q - 1.0));
  }

  InequalityTerms evaluate(Inequality which, std::span<const double> x, std::span<const double> xb,
                           std::span<const double> y, std::span<const double> yb) {
    const double q = c_.q;
    switch (which) {
      case Inequality::kDriftLipschitz: {
        model_.drift(x, y, f_);
        model_.drift(xb, yb, fb_);
        const double poly = 1.0 + std::pow(norm(x), q - 1) + std::pow(norm(xb), q - 1) + std::pow(norm(y), q - 1) +
                            std::pow(norm(yb), q - 1);
        return {std::sqrt(dist2(f_, fb_)), c_.a1 * poly * (std::sqrt(dist2(x, xb)) + std::sqrt(dist2(y, yb)))};
      }
      case Inequality::kDiffusionSplit: {
        model_.diffusion(x, y, g_);
        model_.diffusion(xb, yb, gb_);
        return {dist2(g_, gb_), c_.eps1 * split_dist2(true, x, xb) + c_.eps2 * split_dist2(false, y, yb)};
      }
      case Inequality::kG1Bound:
        return {c_.eps1 * split_dist2(true, x, xb), c_.a2 * dist2(x, xb) + c_.a4 * v_term(x, xb)};
      case Inequality::kG2Bound:
        return {c_.eps2 * split_dist2(false, y, yb), c_.a3 * dist2(y, yb) + c_.a5 * v_term(y, yb)};
      case Inequality::kDriftGrowth:
        model_.drift(x, y, f_);
        return {norm(f_), c_.a6 * (1.0 + std::pow(norm(x), q) + std::pow(norm(y), q))};
      case Inequality::kDiffusionGrowth:
        model_.diffusion(x, y, g_);
        return {dot(g_, g_), c_.a7 + c_.a8 * std::pow(norm(x), q + 1) + c_.a9 * std::pow(norm(y), q + 1)};
      case Inequality::kMonotonicity: {
        model_.drift(x, y, f_);
        model_.drift(xb, yb, fb_);
        double inner = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) inner += (x[i] - xb[i]) * (f_[i] - fb_[i]);
        return {2.0 * inner, -c_.b1 * dist2(x, xb) + c_.b2 * dist2(y, yb) - c_.b3 * v_term(x, xb)};
      }
      case Inequality::kPStarLyapunov: {
        const double p = c_.p_star();
        model_.drift(x, y, f_);
        model_.diffusion(x, y, g_);
        const double nx = norm(x), ny = norm(y);
        const double lhs = 0.5 * p * std::pow(nx, p - 2) * (2.0 * dot(x, f_) + (p - 1) * dot(g_, g_));
        const double rhs = c_.b4 - c_.b5 * std::pow(nx, p) + c_.b6 * std::pow(ny, p) -
                           c_.b7 * std::pow(nx, p + q - 1) + c_.b8 * std::pow(ny, p + q - 1);
        return {lhs, rhs};
      }
      case Inequality::kKhasminskii: {
        model_.drift(x, y, f_);
        model_.diffusion(x, y, g_);
        const double nx = norm(x), ny = norm(y);
        return {2.0 * dot(x, f_) + c_.l2 * dot(g_, g_),
                c_.b9 - c_.b10 * nx * nx + c_.b11 * ny * ny - c_.b12 * std::pow(nx, q + 1) +
                    c_.b13 * std::pow(ny, q + 1)};
      }
    }
    return {};
  }

 private:
  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  static double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }
  static double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  }
  double split_dist2(bool first, std::span<const double> u, std::span<const double> v) {
    if (!model_.split) return 0.0;
    const auto& fn = first ? model_.split->g1 : model_.split->g2;
    fn(u, h_);
    fn(v, hb_);
    return dist2(h_, hb_);
  }

  SddeModel model_;
  AssumptionConstants c_;
  std::vector<double> f_, fb_, g_, gb_, h_, hb_;
};

namespace detail {

struct MarginTracker {
  AuditEntry entry;
  double tolerance;
  bool any_violation = false;

  void add(const InequalityTerms& t, std::span<const double> point) {
    ++entry.samples;
    const double margin = t.margin();
    const bool violation = margin > tolerance * (1.0 + std::abs(t.lhs) + std::abs(t.rhs)) || std::isnan(margin);
    if (violation) ++entry.violations;
    // Once a violation is seen, only violating points may replace the worst point.
    if (violation && !any_violation) {
      any_violation = true;
      entry.worst_margin = margin;
      entry.worst_point.assign(point.begin(), point.end());
    } else if ((violation || !any_violation) && (margin > entry.worst_margin || std::isnan(margin))) {
      entry.worst_margin = margin;
      entry.worst_point.assign(point.begin(), point.end());
    }
  }
};

/// Visits tensor-grid then uniform random points of [-B, B]^dims.
template <class Visit>
void for_each_sample(std::size_t dims, const AuditConfig& cfg, Visit&& visit) {
  std::vector<double> point(dims);
  const std::size_t g = cfg.grid_points;
  double total = 1.0;
  for (std::size_t i = 0; i < dims; ++i) total *= static_cast<double>(g);
  if (g > 0 && total <= static_cast<double>(cfg.max_grid_size)) {
    auto coord = [&](std::size_t i) {
      return g == 1 ? 0.0 : -cfg.half_width + 2.0 * cfg.half_width * static_cast<double>(i) / static_cast<double>(g - 1);
    };
    std::vector<std::size_t> idx(dims, 0);
    for (;;) {
      for (std::size_t i = 0; i < dims; ++i) point[i] = coord(idx[i]);
      visit(std::span<const double>(point));
      std::size_t i = 0;
      while (i < dims && ++idx[i] == g) idx[i++] = 0;
      if (i == dims) break;
    }
  }
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t s = 0; s < cfg.random_samples; ++s) {
    for (double& v : point) v = -cfg.half_width + 2.0 * cfg.half_width * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    visit(std::span<const double>(point));
  }
}

inline AuditReport audit_sampled(const SddeModel& model, const AssumptionConstants& consts, const AuditConfig& cfg,
                                 std::span<const Inequality> which) {
  cfg.validate();
  InequalityEvaluator eval(model, consts);
  std::vector<MarginTracker> trackers;
  for (auto w : which) trackers.push_back({AuditEntry{.id = inequality_id(w), .inequality = inequality_text(w)}, cfg.tolerance});
  const std::size_t d = model.d;
  for_each_sample(4 * d, cfg, [&](std::span<const double> p) {
    auto x = p.subspan(0, d), xb = p.subspan(d, d), y = p.subspan(2 * d, d), yb = p.subspan(3 * d, d);
    for (std::size_t i = 0; i < which.size(); ++i) trackers[i].add(eval.evaluate(which[i], x, xb, y, yb), p);
  });
  AuditReport report;
  for (auto& t : trackers) report.entries.push_back(std::move(t.entry));
  return report;
}

}  // namespace detail

/// Drift polynomial-Lipschitz bound, diffusion split bounds and growth bounds.
inline AuditReport audit_assumption1(const SddeModel& model, const AssumptionConstants& consts,
                                     const AuditConfig& cfg) {
  static constexpr std::array which{Inequality::kDriftLipschitz, Inequality::kDiffusionSplit, Inequality::kG1Bound,
                                    Inequality::kG2Bound,        Inequality::kDriftGrowth,    Inequality::kDiffusionGrowth};
  return detail::audit_sampled(model, consts, cfg, which);
}

/// Monotonicity, p*-moment Lyapunov and Khasminskii bounds, plus the strict
/// inequalities among the constants themselves.
inline AuditReport audit_assumption2(const SddeModel& model, const AssumptionConstants& consts,
                                     const AuditConfig& cfg) {
  static constexpr std::array which{Inequality::kMonotonicity, Inequality::kPStarLyapunov, Inequality::kKhasminskii};
  auto report = detail::audit_sampled(model, consts, cfg, which);
  report.headers = header_checks(consts);
  return report;
}

/// Hoelder continuity of the history: |xi(t) - xi(s)|^2 <= K1 (t - s) for
/// -tau <= s < t <= 0, on all grid pairs plus random pairs.
inline AuditReport audit_assumption3(const SddeModel& model, double k1, const AuditConfig& cfg) {
  cfg.validate();
  validate_model(model);
  detail::MarginTracker tracker{AuditEntry{.id = "A3.holder", .inequality = "|xi(t)-xi(s)|^2 <= K1 (t - s)"}, cfg.tolerance};
  std::vector<double> a(model.d), b(model.d);
  auto visit = [&](double s, double t) {
    model.initial_history(s, a);
    model.initial_history(t, b);
    double dist = 0.0;
    for (std::size_t i = 0; i < model.d; ++i) dist += (b[i] - a[i]) * (b[i] - a[i]);
    const double point[2] = {s, t};
    tracker.add({dist, k1 * (t - s)}, point);
  };
  const double tau = model.tau;
  const std::size_t g = cfg.grid_points;
  auto node = [&](std::size_t i) { return i + 1 == g ? 0.0 : -tau + tau * static_cast<double>(i) / static_cast<double>(g - 1); };
  for (std::size_t i = 0; g > 1 && i < g; ++i)
    for (std::size_t j = i + 1; j < g; ++j) visit(node(i), node(j));
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t n = 0; n < cfg.random_samples; ++n) {
    double s = -tau * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double t = -tau * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (s == t) continue;
    if (s > t) std::swap(s, t);
    visit(s, t);
  }
  AuditReport report;
  report.entries.push_back(std::move(tracker.entry));
  return report;
}

inline AuditReport audit_all(const SddeModel& model, const AssumptionConstants& consts, const AuditConfig& cfg) {
  auto report = audit_assumption1(model, consts, cfg);
  report.append(audit_assumption2(model, consts, cfg));
  report.append(audit_assumption3(model, consts.K1, cfg));
  return report;
}

}  // namespace sdde
