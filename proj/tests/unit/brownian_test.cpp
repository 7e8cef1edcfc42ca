#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "sdde_bem/brownian.hpp"

namespace sdde {
namespace {

TEST(TimeGrid, StepIsDerivedFromDelay) {
  const auto grid = TimeGrid::from_step(1.0, 0.01, 2.0);
  EXPECT_EQ(grid.substeps(), 100);
  EXPECT_EQ(grid.steps(), 200);
  EXPECT_NEAR(grid.delta() * 100, 1.0, 1e-15);
  EXPECT_EQ(grid.time(-100), -1.0);
  EXPECT_EQ(grid.node_count(), 301);
  EXPECT_EQ(grid.index_of(1.5), 150);
}

TEST(TimeGrid, RejectsNonDividingStep) {
  EXPECT_THROW(TimeGrid::from_step(1.0, 0.3, 3.0), UsageError);
  EXPECT_THROW(TimeGrid::from_step(1.0, 0.25, 1.1), UsageError);
  EXPECT_THROW(TimeGrid(1.0, 4, 10).coarsened(4), UsageError);  // 4 does not divide N = 10
  EXPECT_THROW(TimeGrid(1.0, 6, 12).coarsened(4), UsageError);  // nor M = 6
}

TEST(Generate, IncrementsHaveZeroMean) {
  const auto grid = TimeGrid::from_step(1.0, 0.01, 1000.0);  // 1e5 steps
  const auto paths = generate(2024, 1, grid, 1);
  const auto& inc = paths.increments[0];
  ASSERT_EQ(inc.size(), 100000u);
  const double mean = std::accumulate(inc.begin(), inc.end(), 0.0) / static_cast<double>(inc.size());
  EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(0.01 / 1e5));
}

TEST(Generate, IncrementVarianceIsStep) {
  const auto grid = TimeGrid::from_step(1.0, 0.01, 1000.0);
  const auto paths = generate(99, 1, grid, 1);
  const auto& inc = paths.increments[0];
  double mean = 0, sq = 0;
  for (double v : inc) mean += v;
  mean /= static_cast<double>(inc.size());
  for (double v : inc) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(inc.size() - 1);
  EXPECT_LE(std::abs(var / 0.01 - 1.0), 0.05);
}

TEST(Generate, IsDeterministic) {
  const auto grid = TimeGrid::from_step(1.0, 0.1, 5.0);
  const auto a = generate(5, 4, grid, 2);
  const auto b = generate(5, 4, grid, 2);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(generate(6, 4, grid, 2).increments, a.increments);
}

TEST(Generate, ScheduleIndependent) {
  const auto grid = TimeGrid::from_step(1.0, 0.05, 10.0);
  const auto serial = generate(77, 16, grid, 1, 1);
  const auto threaded = generate(77, 16, grid, 1, 8);
  EXPECT_EQ(serial.increments, threaded.increments);
  // A path depends only on (seed, index), not on how many paths are generated.
  EXPECT_EQ(generate(77, 3, grid, 1).increments[2], serial.increments[2]);
}

TEST(Generate, SubstreamsAreUncorrelated) {
  const auto grid = TimeGrid::from_step(1.0, 0.01, 100.0);  // 1e4 draws per path
  const auto paths = generate(3, 6, grid, 1);
  for (std::size_t a = 0; a < paths.path_count; ++a)
    for (std::size_t b = a + 1; b < paths.path_count; ++b) {
      const auto &x = paths.increments[a], &y = paths.increments[b];
      double sxy = 0, sxx = 0, syy = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
      }
      EXPECT_LE(std::abs(sxy / std::sqrt(sxx * syy)), 0.05) << a << "," << b;
    }
}

TEST(Coarsen, PairwiseSums) {
  const std::vector<double> fine{0.1, -0.2, 0.3, 0.4};
  const auto coarse = coarsen_increments(fine, 1, 2);
  ASSERT_EQ(coarse.size(), 2u);
  EXPECT_DOUBLE_EQ(coarse[0], -0.1);
  EXPECT_DOUBLE_EQ(coarse[1], 0.7);
}

TEST(Coarsen, RatioOneIsIdentity) {
  const auto paths = generate(1, 2, TimeGrid::from_step(1.0, 0.25, 2.0), 1);
  const auto same = coarsen(paths, 1);
  EXPECT_EQ(same.increments, paths.increments);
  EXPECT_EQ(same.grid, paths.grid);
}

TEST(Coarsen, PreservesTotalAndGrid) {
  const auto paths = generate(8, 3, TimeGrid::from_step(1.0, 1.0 / 64, 4.0), 1);
  const auto coarse = coarsen(paths, 8);
  EXPECT_EQ(coarse.grid.substeps(), 8);
  EXPECT_EQ(coarse.grid.steps(), 32);
  EXPECT_DOUBLE_EQ(coarse.grid.delta(), 1.0 / 8);
  for (std::size_t p = 0; p < 3; ++p) {
    const double fine_sum = std::accumulate(paths.increments[p].begin(), paths.increments[p].end(), 0.0);
    const double coarse_sum = std::accumulate(coarse.increments[p].begin(), coarse.increments[p].end(), 0.0);
    EXPECT_NEAR(fine_sum, coarse_sum, 1e-12);
  }
}

// Block sums associate differently, so agreement is up to rounding.
void expect_close(const BrownianPaths& a, const BrownianPaths& b) {
  ASSERT_EQ(a.grid, b.grid);
  ASSERT_EQ(a.increments.size(), b.increments.size());
  for (std::size_t p = 0; p < a.increments.size(); ++p) {
    ASSERT_EQ(a.increments[p].size(), b.increments[p].size());
    for (std::size_t i = 0; i < a.increments[p].size(); ++i)
      EXPECT_NEAR(a.increments[p][i], b.increments[p][i], 1e-14);
  }
}

TEST(Coarsen, Composes) {
  const auto paths = generate(12, 2, TimeGrid::from_step(1.0, 1.0 / 48, 3.0), 2);
  expect_close(coarsen(coarsen(paths, 2), 3), coarsen(paths, 6));
  expect_close(coarsen(coarsen(paths, 4), 3), coarsen(paths, 12));
}

TEST(Coarsen, RejectsNonDividingRatio) {
  const auto paths = generate(1, 1, TimeGrid::from_step(1.0, 0.1, 1.0), 1);
  EXPECT_THROW(coarsen(paths, 3), UsageError);
}

TEST(IncrementDump, HeaderLayoutAndRoundTrip) {
  const auto paths = generate(0x0102030405060708ULL, 2, TimeGrid::from_step(1.0, 0.5, 2.0), 1);
  std::stringstream buf;
  write_increments(buf, paths);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 5u * 8u + 2u * 4u * 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x08);  // little-endian seed
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);  // path count
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 4);  // N
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 1);  // m
  const auto back = read_increments(buf, 1.0);
  EXPECT_EQ(back.increments, paths.increments);
  EXPECT_EQ(back.grid, paths.grid);
  EXPECT_EQ(back.master_seed, paths.master_seed);
}

}  // namespace
}  // namespace sdde
