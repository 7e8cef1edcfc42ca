// sdde-bem: run simulations, experiments and assumption audits from a JSON config.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 audit violation.

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sdde_bem/report_io.hpp"
#include "sdde_bem/sdde_bem.hpp"

namespace {

using nlohmann::json;
using namespace sdde;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAudit = 4;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

// Typed access to the config document. Every key must be declared by the
// subcommand; anything else is rejected so typos do not silently fall back to
// defaults.
class Config {
 public:
  Config(json doc, std::string command, std::set<std::string> allowed) : doc_(std::move(doc)), command_(std::move(command)) {
    if (!doc_.is_object()) throw UsageError("config must be a JSON object");
    allowed.insert({"model", "out"});
    for (const auto& [key, value] : doc_.items())
      if (!allowed.count(key)) throw UsageError("config key '" + key + "' is not used by " + command_);
  }

  bool has(const std::string& key) const { return doc_.contains(key); }
  const json& raw(const std::string& key) const { return doc_.at(key); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number()) throw UsageError("config '" + key + "' must be a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_unsigned()) throw UsageError("config '" + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!doc_.at(key).is_boolean()) throw UsageError("config '" + key + "' must be true or false");
    return doc_.at(key).get<bool>();
  }

  std::string text(const std::string& key, std::string fallback) const {
    if (!has(key)) return fallback;
    if (!doc_.at(key).is_string()) throw UsageError("config '" + key + "' must be a string");
    return doc_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_array()) throw UsageError("config '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw UsageError("config '" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_array()) throw UsageError("config '" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw UsageError("config '" + key + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

 private:
  json doc_;
  std::string command_;
};

// Console summaries; report files keep full precision.
std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// Rejects keys that the target struct does not have, then fills from JSON.
template <class T>
T merge_struct(const T& base, const json& overrides, const std::string& what) {
  if (!overrides.is_object()) throw UsageError(what + " must be a JSON object");
  json merged = base;
  for (const auto& [key, value] : overrides.items()) {
    if (key == "preset") continue;
    if (!merged.contains(key)) throw UsageError("unknown " + what + " key '" + key + "'");
    if (!value.is_number()) throw UsageError(what + " key '" + key + "' must be a number");
    merged[key] = value;
  }
  return merged.get<T>();
}

ImplicitSolveConfig solver_from(const Config& cfg) {
  ImplicitSolveConfig solver;
  if (cfg.has("solver")) solver = merge_struct(solver, cfg.raw("solver"), "solver");
  solver.validate();
  return solver;
}

// "constants": "ex1" or {"preset": "ex1", "a6": 0, ...} or a full object.
std::optional<AssumptionConstants> constants_from(const Config& cfg) {
  if (!cfg.has("constants")) return std::nullopt;
  const auto& v = cfg.raw("constants");
  auto preset = [](const std::string& name) {
    if (name == "ex1") return ex1_constants();
    throw UsageError("unknown constants preset '" + name + "' (known: ex1)");
  };
  if (v.is_string()) return preset(v.get<std::string>());
  AssumptionConstants base;
  if (v.is_object() && v.contains("preset")) {
    if (!v.at("preset").is_string()) throw UsageError("constants preset must be a string");
    base = preset(v.at("preset").get<std::string>());
  }
  return merge_struct(base, v, "constants");
}

SddeModel model_from(const Config& cfg) {
  auto model = find_model(cfg.text("model", "ex1-cubic"));
  if (cfg.has("history")) model = with_history(model, named_history(cfg.text("history", "")));
  return model;
}

void guard_steps(const std::vector<double>& steps, const std::optional<AssumptionConstants>& constants) {
  if (!constants) {
    std::cerr << "warning: no assumption constants supplied; step sizes are not checked\n";
    return;
  }
  for (double d : steps) check_step_size(d, &*constants);
}

std::uint64_t seed_from(const Config& cfg, const Flags& flags, std::uint64_t fallback = 42) {
  return flags.seed ? *flags.seed : cfg.count("seed", fallback);
}

std::size_t paths_from(const Config& cfg, const Flags& flags, std::size_t fallback) {
  const std::size_t p = flags.paths ? *flags.paths : static_cast<std::size_t>(cfg.count("paths", fallback));
  if (p == 0) throw UsageError("paths must be >= 1");
  return p;
}

// Files are rendered in memory and written only after every computation has succeeded.
struct Output {
  std::vector<std::pair<std::string, std::string>> files;

  template <class Report>
  void report(const std::string& base, const Report& r) {
    files.emplace_back(base + ".json", json(r).dump(2) + "\n");
    std::ostringstream csv;
    write_csv(csv, r);
    files.emplace_back(base + ".csv", csv.str());
  }

  void flush(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto& [name, content] : files) {
      std::ofstream out(dir / name, std::ios::binary);
      out << content;
      if (!out) throw UsageError("cannot write '" + (dir / name).string() + "'");
    }
  }
};

std::filesystem::path out_dir(const Config& cfg, const Flags& flags) {
  return flags.out ? *flags.out : cfg.text("out", ".");
}

TimeGrid grid_from(const Config& cfg, double tau) {
  if (cfg.has("M") && cfg.has("delta")) throw UsageError("give either M or delta, not both");
  if (cfg.has("N") && cfg.has("T")) throw UsageError("give either N or T, not both");
  const auto m = cfg.has("M") ? static_cast<std::int64_t>(cfg.count("M", 0))
                              : TimeGrid::from_step(tau, cfg.number("delta", 0.01), tau).substeps();
  const double delta = tau / static_cast<double>(m);
  const auto n = cfg.has("N") ? static_cast<std::int64_t>(cfg.count("N", 0))
                              : TimeGrid::from_step(tau, delta, cfg.number("T", 2.0)).steps();
  return TimeGrid(tau, m, n);
}

int cmd_simulate(const json& doc, const Flags& flags) {
  const Config cfg(doc, "simulate", {"history", "seed", "paths", "T", "delta", "M", "N", "solver", "constants"});
  const auto model = model_from(cfg);
  const auto grid = grid_from(cfg, model.tau);
  const auto seed = seed_from(cfg, flags);
  const auto paths = paths_from(cfg, flags, 1);
  const auto solver = solver_from(cfg);
  guard_steps({grid.delta()}, constants_from(cfg));
  const unsigned threads = resolve_threads(flags.threads);

  std::vector<std::optional<Trajectory>> trajs(paths);
  parallel_for(paths, threads, [&](std::size_t p) {
    trajs[p].emplace(integrate(model, grid, path_increments(seed, p, grid, model.m), solver, p));
  });

  Output out;
  const auto base = report_basename("simulate", model.name, seed, grid.delta(), grid.horizon());
  for (std::size_t p = 0; p < paths; ++p) {
    std::ostringstream csv;
    write_trajectory_csv(csv, *trajs[p]);
    out.files.emplace_back(base + "_path" + std::to_string(p) + ".csv", csv.str());
  }
  out.flush(out_dir(cfg, flags));

  std::cout << "model " << model.name << ", " << paths << " path(s), delta " << brief(grid.delta()) << ", T "
            << brief(grid.horizon()) << "\n";
  for (std::size_t i = 0; i < model.d; ++i) {
    double sum = 0, lo = INFINITY, hi = -INFINITY;
    for (const auto& t : trajs) {
      const double v = t->node(grid.steps())[i];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::cout << "x" << (i + 1) << "(T): mean " << brief(sum / static_cast<double>(paths)) << ", min "
              << brief(lo) << ", max " << brief(hi) << "\n";
  }
  return kExitOk;
}

int cmd_strong_error(const json& doc, const Flags& flags) {
  const Config cfg(doc, "strong-error",
                   {"history", "seed", "paths", "T", "delta", "delta_coarse", "delta_ref", "checkpoint_stride", "solver",
                    "constants"});
  if (cfg.has("delta") && cfg.has("delta_coarse")) throw UsageError("give either delta or delta_coarse, not both");
  const auto model = model_from(cfg);
  StrongErrorConfig sc;
  sc.horizon = cfg.number("T", sc.horizon);
  sc.delta_ref = cfg.number("delta_ref", sc.delta_ref);
  sc.delta = cfg.number(cfg.has("delta_coarse") ? "delta_coarse" : "delta", sc.delta);
  sc.paths = paths_from(cfg, flags, sc.paths);
  sc.seed = seed_from(cfg, flags);
  sc.checkpoint_stride = static_cast<std::int64_t>(cfg.count("checkpoint_stride", 0));
  sc.solver = solver_from(cfg);
  guard_steps({sc.delta_ref, sc.delta}, constants_from(cfg));
  sc.threads = resolve_threads(flags.threads);

  const auto report = run_strong_error(model, sc);
  Output out;
  out.report(report_basename("strong-error", model.name, sc.seed, report.delta, sc.horizon), report);
  out.flush(out_dir(cfg, flags));
  double worst = 0;
  for (const auto& p : report.points) worst = std::max(worst, p.ratio);
  std::cout << "strong error: " << report.points.size() << " checkpoints, max e_strong/delta "
            << brief(worst) << "\n";
  return kExitOk;
}

int cmd_rate(const json& doc, const Flags& flags) {
  const Config cfg(doc, "rate", {"history", "seed", "paths", "T", "deltas", "delta_ref", "solver", "constants"});
  const auto model = model_from(cfg);
  RateConfig rc;
  rc.horizon = cfg.number("T", rc.horizon);
  rc.deltas = cfg.numbers("deltas", rc.deltas);
  rc.delta_ref = cfg.number("delta_ref", rc.delta_ref);
  rc.paths = paths_from(cfg, flags, rc.paths);
  rc.seed = seed_from(cfg, flags);
  rc.solver = solver_from(cfg);
  if (rc.deltas.size() < 4)
    throw UsageError("rate needs at least 4 step sizes in 'deltas', got " + std::to_string(rc.deltas.size()));
  auto steps = rc.deltas;
  steps.push_back(rc.delta_ref);
  guard_steps(steps, constants_from(cfg));
  rc.threads = resolve_threads(flags.threads);

  const auto report = run_rate_regression(model, rc);
  Output out;
  out.report(report_basename("rate", model.name, rc.seed, rc.delta_ref, rc.horizon), report);
  out.flush(out_dir(cfg, flags));
  std::cout << "rate: log-log slope " << brief(report.slope) << " over " << report.points.size()
            << " step sizes\n";
  return kExitOk;
}

int cmd_invariant(const json& doc, const Flags& flags) {
  const Config cfg(doc, "invariant",
                   {"history", "seed", "paths", "T_ref", "compare_times", "delta", "delta_ref", "alt_history",
                    "disjoint_blocks", "solver", "constants"});
  const auto model = model_from(cfg);
  InvariantConfig ic;
  ic.t_ref = cfg.number("T_ref", ic.t_ref);
  ic.compare_times = cfg.numbers("compare_times", ic.compare_times);
  ic.delta = cfg.number("delta", ic.delta);
  ic.delta_ref = cfg.number("delta_ref", ic.delta_ref);
  if (cfg.has("alt_history")) ic.alt_history = named_history(cfg.text("alt_history", ""));
  ic.disjoint_blocks = cfg.flag("disjoint_blocks", ic.disjoint_blocks);
  ic.paths = paths_from(cfg, flags, ic.paths);
  ic.seed = seed_from(cfg, flags);
  ic.solver = solver_from(cfg);
  guard_steps({ic.delta, ic.delta_ref}, constants_from(cfg));
  ic.threads = resolve_threads(flags.threads);

  const auto report = run_invariant_study(model, ic);
  Output out;
  out.report(report_basename("invariant", model.name, ic.seed, ic.delta, ic.t_ref), report);
  out.flush(out_dir(cfg, flags));
  std::cout << "invariant: K-S vs t_ref " << brief(ic.t_ref) << ":";
  for (const auto& p : report.ks) std::cout << " t=" << brief(p.t) << " " << brief(p.ks);
  std::cout << "\n";
  return kExitOk;
}

int cmd_ergodicity(const json& doc, const Flags& flags) {
  const Config cfg(doc, "ergodicity",
                   {"seed", "paths", "T", "delta", "initials", "observables", "sample_stride", "solver", "constants"});
  const auto model = model_from(cfg);
  ErgodicityConfig ec;
  ec.horizon = cfg.number("T", ec.horizon);
  ec.delta = cfg.number("delta", ec.delta);
  for (const auto& name : cfg.texts("initials", {"one-plus-cos", "t-minus-one", "constant:-2"}))
    ec.initials.push_back(named_history(name));
  for (const auto& name : cfg.texts("observables", {"cube", "exp-neg"})) ec.observables.push_back(named_observable(name));
  ec.sample_stride = static_cast<std::int64_t>(cfg.count("sample_stride", 0));
  ec.paths = paths_from(cfg, flags, ec.paths);
  ec.seed = seed_from(cfg, flags);
  ec.solver = solver_from(cfg);
  guard_steps({ec.delta}, constants_from(cfg));
  ec.threads = resolve_threads(flags.threads);

  const auto report = run_ergodicity(model, ec);
  Output out;
  out.report(report_basename("ergodicity", model.name, ec.seed, ec.delta, ec.horizon), report);
  out.flush(out_dir(cfg, flags));
  std::cout << "ergodicity: terminal spread";
  for (const auto& s : report.terminal_spread) std::cout << " " << s.observable << "=" << brief(s.spread);
  std::cout << "\n";
  return kExitOk;
}

int cmd_moments(const json& doc, const Flags& flags) {
  const Config cfg(doc, "moments", {"history", "seed", "paths", "T", "delta", "p", "solver", "constants"});
  const auto model = model_from(cfg);
  MomentConfig mc;
  mc.horizon = cfg.number("T", mc.horizon);
  mc.delta = cfg.number("delta", mc.delta);
  mc.p = cfg.number("p", mc.p);
  mc.paths = paths_from(cfg, flags, mc.paths);
  mc.seed = seed_from(cfg, flags);
  mc.solver = solver_from(cfg);
  guard_steps({mc.delta}, constants_from(cfg));
  mc.threads = resolve_threads(flags.threads);

  const auto report = run_moment_track(model, mc);
  Output out;
  out.report(report_basename("moments", model.name, mc.seed, mc.delta, mc.horizon), report);
  out.flush(out_dir(cfg, flags));
  double sup = 0;
  for (const auto& p : report.moments) sup = std::max(sup, p.value);
  std::cout << "moments: sup_k E|X_k|^" << brief(mc.p) << " = " << brief(sup) << "\n";
  return kExitOk;
}

AuditConfig audit_from(const Config& cfg, const Flags& flags) {
  AuditConfig ac;
  if (cfg.has("audit")) {
    const auto& a = cfg.raw("audit");
    const Config sub(a, "audit", {"half_width", "grid_points", "random_samples", "seed", "tolerance"});
    ac.half_width = sub.number("half_width", ac.half_width);
    ac.grid_points = static_cast<std::size_t>(sub.count("grid_points", ac.grid_points));
    ac.random_samples = static_cast<std::size_t>(sub.count("random_samples", ac.random_samples));
    ac.seed = sub.count("seed", ac.seed);
    ac.tolerance = sub.number("tolerance", ac.tolerance);
  }
  if (flags.seed) ac.seed = *flags.seed;
  ac.validate();
  return ac;
}

int cmd_check(const json& doc, const Flags& flags) {
  const Config cfg(doc, "check", {"history", "constants", "audit"});
  if (flags.paths) throw UsageError("--paths is not used by check");
  const auto model = model_from(cfg);
  const auto constants = constants_from(cfg);
  if (!constants) throw UsageError("check needs a 'constants' block");
  const auto audit = audit_from(cfg, flags);

  const auto report = audit_all(model, *constants, audit);
  Output out;
  out.files.emplace_back(sanitize_filename("check_" + model.name + "_seed" + std::to_string(audit.seed)) + ".json",
                         json(report).dump(2) + "\n");
  out.flush(out_dir(cfg, flags));
  for (const auto& e : report.entries)
    std::cout << (e.violated() ? "VIOLATED " : "ok       ") << e.id << "  worst margin "
              << (std::isfinite(e.worst_margin) ? brief(e.worst_margin) : "n/a") << "\n";
  for (const auto& h : report.headers)
    std::cout << (h.holds() ? "ok       " : "VIOLATED ") << "[" << h.id << "]\n";
  std::cout << report.summary() << "\n";
  return report.has_violation() ? kExitAudit : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift-implicit Euler-Maruyama for stochastic delay differential equations"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "master seed (overrides config)");
  app.add_option("--paths", flags.paths, "number of paths (overrides config)");
  app.add_option("--threads", flags.threads, "worker threads (default: $SDDE_BEM_THREADS, else all cores)");
  app.add_option("--out", flags.out, "output directory (overrides config)");

  using Command = int (*)(const json&, const Flags&);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands{
      {"simulate", {"integrate paths and write one trajectory CSV per path", cmd_simulate}},
      {"strong-error", {"mean-square error of a coarse run against a fine reference over time", cmd_strong_error}},
      {"rate", {"log-log regression of terminal RMS error against step size", cmd_rate}},
      {"invariant", {"K-S against a long-time reference and coupled distance between histories", cmd_invariant}},
      {"ergodicity", {"time averages from several initial histories", cmd_ergodicity}},
      {"moments", {"E|X_k|^p at every node", cmd_moments}},
      {"check", {"audit the assumption inequalities for a constants set", cmd_check}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string chosen = app.get_subcommands().front()->get_name();
  try {
    const json doc = read_config_file(flags.config);
    for (const auto& [name, entry] : commands)
      if (name == chosen) return entry.second(doc, flags);
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StepFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ModelEvalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
