#include <sstream>

#include <gtest/gtest.h>

#include "sdde_bem/builtin_models.hpp"
#include "sdde_bem/report_io.hpp"

namespace sdde {
namespace {

TEST(ReportBasename, Layout) {
  EXPECT_EQ(report_basename("strong-error", "ex1-cubic", 42, 0.01, 20), "strong-error_ex1-cubic_seed42_d0.01_T20");
  EXPECT_EQ(report_basename("simulate", "a:b/c", 1, 0.5, 3), "simulate_a-b-c_seed1_d0.5_T3");
}

TEST(ReportJson, RoundTripsDoubles) {
  StrongErrorReport r;
  r.model = "m";
  r.delta = 0.1;
  r.points.push_back({3, 0.30000000000000004, 1.0 / 3.0, 10.0 / 3.0});
  const auto j = nlohmann::json::parse(nlohmann::json(r).dump());
  EXPECT_EQ(j["kind"], "strong-error");
  EXPECT_EQ(j["points"][0]["t"].get<double>(), 0.30000000000000004);
  EXPECT_EQ(j["points"][0]["e_strong"].get<double>(), 1.0 / 3.0);
}

TEST(ReportJson, AuditNullsMissingMargins) {
  AuditReport r;
  r.entries.push_back(AuditEntry{.id = "A.x", .inequality = "text"});
  const nlohmann::json j = r;
  EXPECT_TRUE(j["entries"][0]["worst_margin"].is_null());
  EXPECT_FALSE(j["violation"].get<bool>());
}

TEST(ConstantsJson, MissingKeysKeepDefaults) {
  const auto c = nlohmann::json::parse(R"({"q": 3, "a6": 11})").get<AssumptionConstants>();
  EXPECT_EQ(c.q, 3.0);
  EXPECT_EQ(c.a6, 11.0);
  EXPECT_EQ(c.b1, 0.0);
  const auto back = nlohmann::json(ex1_constants()).get<AssumptionConstants>();
  EXPECT_EQ(back.b4, ex1_constants().b4);
}

TEST(SolverJson, PartialOverride) {
  const auto s = nlohmann::json::parse(R"({"max_newton_iters": 7})").get<ImplicitSolveConfig>();
  EXPECT_EQ(s.max_newton_iters, 7);
  EXPECT_EQ(s.rel_tol, ImplicitSolveConfig{}.rel_tol);
}

TEST(ReportCsv, RateAndMoments) {
  const std::vector<double> deltas{0.5, 0.25}, rms{0.2, 0.1};
  std::ostringstream os;
  write_csv(os, rate_report_from_errors(deltas, rms));
  EXPECT_EQ(os.str(), "delta,rms\n0.5,0.20000000000000001\n0.25,0.10000000000000001\n");
  MomentReport m;
  m.moments = {{0, 0.0, 1.0}, {1, 0.5, 0.25}};
  std::ostringstream ms;
  write_csv(ms, m);
  EXPECT_EQ(ms.str().substr(0, ms.str().find('\n')), "k,t,moment");
}

}  // namespace
}  // namespace sdde
