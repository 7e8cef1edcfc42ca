#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "sdde_bem/assumptions.hpp"
#include "sdde_bem/experiments.hpp"
#include "sdde_bem/format.hpp"

// JSON and CSV serialization of reports. JSON numbers use nlohmann's
// shortest round-trip formatting; CSV uses 17 significant digits.

namespace sdde {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AssumptionConstants, q, a1, a2, a3, a4, a5, a6, a7, a8, a9, eps1, eps2,
                                                b1, b2, b3, b4, b5, b6, b7, b8, b9, b10, b11, b12, b13, l1, l2, K1)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ImplicitSolveConfig, rel_tol, abs_tol, max_newton_iters,
                                                max_bisection_iters, fd_jacobian_step, max_damping_halvings)

inline void to_json(nlohmann::json& j, const SeriesPoint& p) { j = {{"k", p.k}, {"t", p.t}, {"value", p.value}}; }

inline void to_json(nlohmann::json& j, const StrongErrorReport& r) {
  j = {{"kind", "strong-error"}, {"model", r.model},       {"seed", r.seed},
       {"paths", r.paths},       {"delta_ref", r.delta_ref}, {"delta", r.delta},
       {"horizon", r.horizon},   {"checkpoint_stride", r.checkpoint_stride}};
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) pts.push_back({{"k", p.k}, {"t", p.t}, {"e_strong", p.e_strong}, {"ratio", p.ratio}});
}

inline void to_json(nlohmann::json& j, const RateReport& r) {
  j = {{"kind", "rate"},        {"model", r.model},     {"seed", r.seed},
       {"paths", r.paths},      {"delta_ref", r.delta_ref}, {"horizon", r.horizon},
       {"slope", r.slope},      {"intercept", r.intercept}};
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) pts.push_back({{"delta", p.delta}, {"rms", p.rms}});
}

inline void to_json(nlohmann::json& j, const InvariantReport& r) {
  j = {{"kind", "invariant"}, {"model", r.model},         {"seed", r.seed},   {"paths", r.paths},
       {"delta", r.delta},    {"delta_ref", r.delta_ref}, {"t_ref", r.t_ref}, {"alt_history", r.alt_history},
       {"dl_bound", r.dl_bound}};
  auto& ks = j["ks"] = nlohmann::json::array();
  for (const auto& p : r.ks) ks.push_back({{"t", p.t}, {"ks", p.ks}});
}

inline void to_json(nlohmann::json& j, const ErgodicityReport& r) {
  j = {{"kind", "ergodicity"}, {"model", r.model}, {"seed", r.seed},
       {"paths", r.paths},     {"delta", r.delta}, {"horizon", r.horizon}};
  auto& curves = j["curves"] = nlohmann::json::array();
  for (const auto& c : r.curves)
    curves.push_back({{"initial", c.initial}, {"observable", c.observable}, {"points", c.points}});
  auto& spread = j["terminal_spread"] = nlohmann::json::object();
  for (const auto& s : r.terminal_spread) spread[s.observable] = s.spread;
}

inline void to_json(nlohmann::json& j, const MomentReport& r) {
  j = {{"kind", "moments"}, {"model", r.model},     {"seed", r.seed}, {"paths", r.paths},
       {"delta", r.delta},  {"horizon", r.horizon}, {"p", r.p},       {"moments", r.moments}};
}

inline void to_json(nlohmann::json& j, const AuditReport& r) {
  j = {{"violation", r.has_violation()}, {"summary", r.summary()}};
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries) {
    // -inf (no samples) is not representable in JSON.
    nlohmann::json margin = std::isfinite(e.worst_margin) ? nlohmann::json(e.worst_margin) : nlohmann::json();
    entries.push_back({{"id", e.id},
                       {"inequality", e.inequality},
                       {"worst_margin", margin},
                       {"worst_point", e.worst_point},
                       {"samples", e.samples},
                       {"violations", e.violations},
                       {"violated", e.violated()}});
  }
  auto& headers = j["headers"] = nlohmann::json::array();
  for (const auto& h : r.headers)
    headers.push_back({{"id", h.id}, {"lhs", h.lhs}, {"rhs", h.rhs}, {"holds", h.holds()}});
}

inline void write_csv(std::ostream& os, const StrongErrorReport& r) {
  os << "k,t,e_strong,ratio\n";
  for (const auto& p : r.points)
    os << p.k << ',' << format_double(p.t) << ',' << format_double(p.e_strong) << ',' << format_double(p.ratio) << '\n';
}

inline void write_csv(std::ostream& os, const RateReport& r) {
  os << "delta,rms\n";
  for (const auto& p : r.points) os << format_double(p.delta) << ',' << format_double(p.rms) << '\n';
}

inline void write_csv(std::ostream& os, const InvariantReport& r) {
  os << "series,t,value\n";
  for (const auto& p : r.ks) os << "ks," << format_double(p.t) << ',' << format_double(p.ks) << '\n';
  for (const auto& p : r.dl_bound) os << "dl_bound," << format_double(p.t) << ',' << format_double(p.value) << '\n';
}

inline void write_csv(std::ostream& os, const ErgodicityReport& r) {
  os << "initial,observable,k,t,value\n";
  for (const auto& c : r.curves)
    for (const auto& p : c.points)
      os << c.initial << ',' << c.observable << ',' << p.k << ',' << format_double(p.t) << ','
         << format_double(p.value) << '\n';
}

inline void write_csv(std::ostream& os, const MomentReport& r) { write_series_csv(os, r.moments, "moment"); }

/// Replaces ':' and '/' so names like "constant:-2" are usable in file names.
inline std::string sanitize_filename(std::string name) {
  for (char& ch : name)
    if (ch == ':' || ch == '/') ch = '-';
  return name;
}

/// "<kind>_<model>_seed<seed>_d<delta>_T<horizon>".
inline std::string report_basename(std::string_view kind, std::string_view model, std::uint64_t seed, double delta,
                                   double horizon) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_d%g_T%g", delta, horizon);
  return sanitize_filename(std::string(kind) + "_" + std::string(model) + "_seed" + std::to_string(seed) + buf);
}

}  // namespace sdde
