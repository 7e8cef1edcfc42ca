// Acceptance checks, one line per criterion:
//   sdde_bem_acceptance [--criterion N]
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "sdde_bem/sdde_bem.hpp"

#ifndef SDDE_BEM_CLI
#error "SDDE_BEM_CLI must name the sdde-bem executable"
#endif

namespace {

using namespace sdde;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Root of 1.01 z + 0.1 z^3 = 0.1 by bisection in long double; the cubic is
// increasing, with a sign change on [0, 0.1].
long double bisection_oracle() {
  auto h = [](long double z) { return 1.01L * z + 0.1L * z * z * z - 0.1L; };
  long double lo = 0.0L, hi = 0.1L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (h(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5L * (lo + hi);
}

bool same_6_sig_figs(double a, double b) { return fmt(a, 6) == fmt(b, 6); }

Outcome criterion1() {
  const auto model = make_ex1_cubic();
  const auto z = implicit_step_solve(model, {0.0}, {0.0}, 0.01, {}, {0.0})[0];
  const double residual = std::abs(1.01 * z + 0.1 * z * z * z - 0.1);
  const double oracle = static_cast<double>(bisection_oracle());
  return {residual <= 1e-10 && same_6_sig_figs(z, oracle),
          "z=" + fmt(z, 9) + " oracle=" + fmt(oracle, 9) + " residual=" + fmt(residual, 3)};
}

Outcome criterion2() {
  const auto model = make_zero_noise_linear();
  const TimeGrid grid(1.0, 2, 100);  // delta = 0.5
  const auto traj = integrate(model, grid, path_increments(1, 0, grid, 1));
  double worst = 0.0;
  for (std::int64_t k = 0; k <= 100; ++k) {
    const double exact = std::pow(1.5, -static_cast<double>(k));
    worst = std::max(worst, std::abs(traj.value(k) - exact) / exact);
  }
  return {worst <= 1e-12, "max relative error " + fmt(worst, 3) + " over k<=100"};
}

Outcome criterion3() {
  const auto model = make_ou_linear();
  const auto grid = TimeGrid::from_step(1.0, 0.01, 1.0);
  const std::size_t n = 2000;
  std::vector<double> finals(n);
  for (std::size_t p = 0; p < n; ++p)
    finals[p] = integrate(model, grid, path_increments(2024, p, grid, 1), {}, p).value(grid.steps());
  double mean = 0.0;
  for (double v : finals) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : finals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double se = std::sqrt(var / static_cast<double>(n));
  const double theta = kOuRate, sigma = kOuSigma;
  const double exact_mean = kOuStart * std::exp(-theta);
  const double exact_var = sigma * sigma * (1.0 - std::exp(-2.0 * theta)) / (2.0 * theta);
  const bool mean_ok = std::abs(mean - exact_mean) <= 3.0 * se + 0.01;
  const bool var_ok = std::abs(var / exact_var - 1.0) <= 0.10;
  return {mean_ok && var_ok, "mean " + fmt(mean) + " vs " + fmt(exact_mean) + " (3SE+0.01=" + fmt(3 * se + 0.01, 3) +
                                 "), variance " + fmt(var) + " vs " + fmt(exact_var)};
}

Outcome criterion4() {
  RateConfig cfg;  // T=4, tau/2^5..tau/2^8 vs tau/2^12, 400 paths, seed 42
  const auto report = run_rate_regression(make_ex1_cubic(), cfg);
  std::string rms;
  for (const auto& p : report.points) rms += " " + fmt(p.rms, 4);
  return {report.slope >= 0.4 && report.slope <= 0.6, "slope " + fmt(report.slope, 4) + " (rms" + rms + ")"};
}

Outcome criterion5() {
  StrongErrorConfig cfg;  // T=20, delta 1e-2 vs 1e-3, 200 paths
  cfg.checkpoint_stride = 1;
  const auto report = run_strong_error(make_ex1_cubic(), cfg);
  double early = 0.0, late = 0.0;
  for (const auto& p : report.points) {
    if (p.t > 0.0 && p.t <= 10.0 + 1e-9) early = std::max(early, p.ratio);
    if (p.t >= 10.0 - 1e-9) late = std::max(late, p.ratio);
  }
  return {late <= 2.0 * early, "max ratio on [10,20] " + fmt(late, 4) + ", on (0,10] " + fmt(early, 4)};
}

Outcome criterion6() {
  MomentConfig cfg;  // T=50, delta 1e-2, 200 paths, p=2
  const auto report = run_moment_track(make_ex1_cubic(), cfg);
  std::vector<double> m;
  for (const auto& p : report.moments) m.push_back(p.value);
  const auto sup = running_sup(m);
  const std::size_t k25 = 2500, k50 = 5000;
  const double late_max = *std::max_element(m.begin() + k25, m.begin() + k50 + 1);
  const bool ok = sup[k50] <= 1.25 * sup[k25] && late_max <= 1.25 * m[k25];
  return {ok, "S(25)=" + fmt(sup[k25], 4) + " S(50)=" + fmt(sup[k50], 4) + " m(25)=" + fmt(m[k25], 4) +
                  " max m on [25,50]=" + fmt(late_max, 4)};
}

Outcome criterion7() {
  InvariantConfig cfg;  // t in {5,10,15,20} vs T_ref=30, 200+200 disjoint paths
  const auto report = run_invariant_study(make_ex1_cubic(), cfg);
  const auto& ks = report.ks;
  const bool trend = ks[2].ks <= ks[0].ks + 0.05 && ks[3].ks <= ks[0].ks + 0.05;
  std::string values;
  for (const auto& p : ks) values += " " + fmt(p.ks, 3);
  return {trend && ks[3].ks <= 0.15, "K-S" + values};
}

Outcome criterion8() {
  InvariantConfig cfg;
  cfg.alt_history = constant_history(-2.0);
  cfg.compare_times = {10};
  cfg.t_ref = 10;
  cfg.delta_ref = cfg.delta;
  const auto report = run_invariant_study(make_ex1_cubic(), cfg);
  double at1 = NAN, at10 = NAN;
  for (const auto& p : report.dl_bound) {
    if (std::abs(p.t - 1.0) < 1e-9) at1 = p.value;
    if (std::abs(p.t - 10.0) < 1e-9) at10 = p.value;
  }
  return {at10 < 0.5 * at1, "dL bound t=1: " + fmt(at1, 4) + ", t=10: " + fmt(at10, 4)};
}

Outcome criterion9() {
  ErgodicityConfig cfg;  // T=30, 200 paths
  cfg.initials = {named_history("one-plus-cos"), named_history("t-minus-one"), constant_history(-2.0)};
  cfg.observables = {named_observable("cube"), named_observable("exp-neg")};
  const auto report = run_ergodicity(make_ex1_cubic(), cfg);
  bool ok = true;
  std::string detail = "spread";
  for (const auto& s : report.terminal_spread) {
    ok = ok && s.spread <= 0.1;
    detail += " " + s.observable + "=" + fmt(s.spread, 4);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// CLI-level criteria.

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sdde_bem_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SDDE_BEM_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  const auto path = dir / (name + ".json");
  std::ofstream(path) << j.dump(2);
  return path;
}

nlohmann::json ex1_check(nlohmann::json constants) {
  return {{"model", "ex1-cubic"},
          {"constants", std::move(constants)},
          {"audit", {{"half_width", 2.0}, {"grid_points", 41}, {"random_samples", 10000}}}};
}

Outcome criterion10() {
  const auto dir = scratch_dir("c10");
  // f = -x with no noise; a clean baseline plus the two broken variants.
  const nlohmann::json linear_base = {{"q", 2}, {"a1", 1}, {"a6", 0.5}, {"b1", 1}, {"b3", 0.25}, {"b4", 200}, {"b5", 6},
                                      {"b7", 1}, {"b9", 10}, {"b10", 2}, {"b12", 1}, {"l1", 3}, {"l2", 1.5}};
  auto low_growth = linear_base;
  low_growth["a6"] = 0.1;
  auto strong_monotone = linear_base;
  strong_monotone["b1"] = 2;
  strong_monotone["b3"] = 0.1;
  auto linear_check = [](nlohmann::json c) {
    return nlohmann::json{{"model", "zero-noise-linear"},
                          {"constants", std::move(c)},
                          {"audit", {{"half_width", 2.0}, {"grid_points", 41}, {"random_samples", 10000}}}};
  };
  struct Case {
    std::string name;
    nlohmann::json config;
    int expected;
  };
  const std::vector<Case> cases{
      {"ex1-paper-constants", ex1_check("ex1"), 0},
      {"ex1-a6-zero", ex1_check({{"preset", "ex1"}, {"a6", 0}}), 4},
      {"linear-a6-0.1", linear_check(low_growth), 4},
      {"linear-b3-positive", linear_check(strong_monotone), 4},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const int code = run_cli("check --config \"" + write_config(dir, c.name, c.config).string() + "\" --out \"" +
                             (dir / c.name).string() + "\"");
    ok = ok && code == c.expected;
    detail += c.name + " exit " + std::to_string(code) + " (want " + std::to_string(c.expected) + "); ";
  }
  return {ok, detail};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

Outcome criterion11() {
  const auto dir = scratch_dir("c11");
  const std::vector<std::pair<std::string, nlohmann::json>> runs{
      {"simulate", {{"T", 2}, {"delta", 0.01}, {"paths", 6}}},
      {"strong-error", {{"T", 4}, {"delta_ref", 1e-3}, {"delta", 1e-2}, {"paths", 16}}},
      {"rate", {{"T", 2}, {"deltas", {1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256}}, {"delta_ref", 1.0 / 1024}, {"paths", 16}}},
      {"invariant", {{"T_ref", 6}, {"compare_times", {2, 4}}, {"paths", 16}}},
      {"ergodicity", {{"T", 5}, {"paths", 16}}},
      {"moments", {{"T", 5}, {"paths", 16}}},
      {"check", ex1_check({{"preset", "ex1"}, {"a6", 11}})},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [command, config] : runs) {
    const auto cfg = write_config(dir, command, config);
    std::map<std::string, std::string> outputs[2];
    int codes[2];
    const unsigned threads[2] = {1, 8};
    for (int i = 0; i < 2; ++i) {
      const auto out = dir / (command + "_t" + std::to_string(threads[i]));
      codes[i] = run_cli(command + " --config \"" + cfg.string() + "\" --threads " + std::to_string(threads[i]) +
                         " --out \"" + out.string() + "\"");
      if (fs::exists(out)) outputs[i] = read_tree(out);
    }
    const bool same = codes[0] == 0 && codes[1] == 0 && !outputs[0].empty() && outputs[0] == outputs[1];
    ok = ok && same;
    detail += command + (same ? " identical" : " DIFFERS (exit " + std::to_string(codes[0]) + "/" +
                                                   std::to_string(codes[1]) + ")") + "; ";
  }
  return {ok, detail};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<std::string, std::function<Outcome()>>> all{
      {1, {"implicit step matches bisection oracle", criterion1}},
      {2, {"zero-noise linear model is exact", criterion2}},
      {3, {"OU mean and variance at T=1", criterion3}},
      {4, {"strong order 1/2 (slope in [0.4, 0.6])", criterion4}},
      {5, {"uniform-in-time error ratio", criterion5}},
      {6, {"uniform second-moment bound", criterion6}},
      {7, {"K-S stabilization toward T_ref", criterion7}},
      {8, {"coupled contraction dL(10) < dL(1)/2", criterion8}},
      {9, {"ergodic time averages agree", criterion9}},
      {10, {"assumption audit exit codes", criterion10}},
      {11, {"thread-count independent report files", criterion11}},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: " << argv[0] << " [--criterion N]...\n";
      return 2;
    }
  }
  if (selected.empty())
    for (const auto& [n, c] : criteria()) selected.push_back(n);

  bool all_pass = true;
  for (int n : selected) {
    const auto it = criteria().find(n);
    if (it == criteria().end()) {
      std::cerr << "no criterion " << n << "\n";
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = it->second.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " #" << n << " " << it->second.first << ": " << outcome.detail
              << " (" << fmt(secs, 3) << " s)" << std::endl;
    all_pass = all_pass && outcome.pass;
  }
  fs::remove_all(fs::temp_directory_path() / ("sdde_bem_acceptance_" + std::to_string(::getpid())));
  return all_pass ? 0 : 1;
}
