#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/grid.hpp"
#include "sdde_bem/parallel.hpp"

namespace sdde {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the substream for one path; depends only on (master, path index).
constexpr std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t path_index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(path_index + 0x632be59bd9b4e019ULL));
}

/// Standard normal variates from mt19937_64 via the Box-Muller transform.
/// Both outputs of each transform are used, in (cos, sin) order.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1), 53-bit resolution.
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phase = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phase);
    has_spare_ = true;
    return r * std::cos(phase);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fills `out` (N*m, row-major by step) with the increments of one path on `grid`.
inline void fill_path_increments(std::uint64_t master_seed, std::uint64_t path_index, const TimeGrid& grid,
                                 std::size_t m, std::span<double> out) {
  const auto count = static_cast<std::size_t>(grid.steps()) * m;
  if (out.size() != count) throw UsageError("increment buffer has wrong size");
  NormalStream normals(substream_seed(master_seed, path_index));
  const double scale = std::sqrt(grid.delta());
  for (double& v : out) v = scale * normals.next();
}

inline std::vector<double> path_increments(std::uint64_t master_seed, std::uint64_t path_index, const TimeGrid& grid,
                                           std::size_t m) {
  std::vector<double> out(static_cast<std::size_t>(grid.steps()) * m);
  fill_path_increments(master_seed, path_index, grid, m, out);
  return out;
}

/// Block sums of `ratio` consecutive steps.
inline std::vector<double> coarsen_increments(std::span<const double> fine, std::size_t m, std::size_t ratio) {
  if (ratio == 0 || m == 0) throw UsageError("coarsen: ratio and m must be positive");
  const std::size_t steps = fine.size() / m;
  if (steps * m != fine.size() || steps % ratio != 0)
    throw UsageError("coarsen: ratio " + std::to_string(ratio) + " does not divide step count " +
                     std::to_string(steps));
  std::vector<double> coarse(fine.size() / ratio, 0.0);
  for (std::size_t k = 0; k < steps / ratio; ++k)
    for (std::size_t r = 0; r < ratio; ++r)
      for (std::size_t j = 0; j < m; ++j) coarse[k * m + j] += fine[(k * ratio + r) * m + j];
  return coarse;
}

/// Increments for a set of paths; increments[p] is N x m, row-major.
struct BrownianPaths {
  std::uint64_t master_seed = 0;
  std::size_t path_count = 0;
  TimeGrid grid{1.0, 1, 0};
  std::size_t m = 1;
  std::vector<std::vector<double>> increments;

  std::span<const double> path(std::size_t p) const { return increments.at(p); }
  double increment(std::size_t p, std::size_t k, std::size_t j) const { return increments.at(p)[k * m + j]; }
};

inline BrownianPaths generate(std::uint64_t master_seed, std::size_t path_count, const TimeGrid& grid,
                              std::size_t m, unsigned threads = 1) {
  if (path_count < 1) throw UsageError("generate: path_count must be >= 1");
  if (m < 1) throw UsageError("generate: m must be >= 1");
  BrownianPaths paths{master_seed, path_count, grid, m, std::vector<std::vector<double>>(path_count)};
  parallel_for(path_count, threads,
               [&](std::size_t p) { paths.increments[p] = path_increments(master_seed, p, grid, m); });
  return paths;
}

inline BrownianPaths coarsen(const BrownianPaths& paths, std::int64_t ratio) {
  BrownianPaths out{paths.master_seed, paths.path_count, paths.grid.coarsened(ratio), paths.m, {}};
  out.increments.reserve(paths.path_count);
  for (const auto& fine : paths.increments)
    out.increments.push_back(coarsen_increments(fine, paths.m, static_cast<std::size_t>(ratio)));
  return out;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw UsageError("increment dump truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Binary dump: little-endian u64 seed, path_count, N, m, f64 delta, then every
/// path's N*m increments as f64.
inline void write_increments(std::ostream& os, const BrownianPaths& paths) {
  detail::put_u64(os, paths.master_seed);
  detail::put_u64(os, paths.path_count);
  detail::put_u64(os, static_cast<std::uint64_t>(paths.grid.steps()));
  detail::put_u64(os, paths.m);
  detail::put_u64(os, std::bit_cast<std::uint64_t>(paths.grid.delta()));
  for (const auto& path : paths.increments)
    for (double v : path) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
}

/// Reads a dump written by write_increments. The grid's tau is not stored, so
/// the caller supplies it.
inline BrownianPaths read_increments(std::istream& is, double tau) {
  BrownianPaths paths;
  paths.master_seed = detail::get_u64(is);
  paths.path_count = detail::get_u64(is);
  const auto steps = static_cast<std::int64_t>(detail::get_u64(is));
  paths.m = detail::get_u64(is);
  const double delta = std::bit_cast<double>(detail::get_u64(is));
  paths.grid = TimeGrid::from_step(tau, delta, static_cast<double>(steps) * delta);
  paths.increments.assign(paths.path_count, std::vector<double>(static_cast<std::size_t>(steps) * paths.m));
  for (auto& path : paths.increments)
    for (double& v : path) v = std::bit_cast<double>(detail::get_u64(is));
  return paths;
}

}  // namespace sdde
