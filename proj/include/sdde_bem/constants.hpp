#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/format.hpp"

namespace sdde {

/// Constants of the polynomial-Lipschitz, monotonicity/Khasminskii and Hoelder
/// conditions. Unused constants default to zero.
struct AssumptionConstants {
  double q = 2.0;
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0, a9 = 0;
  double eps1 = 0, eps2 = 0;
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0, b7 = 0, b8 = 0, b9 = 0, b10 = 0, b11 = 0, b12 = 0, b13 = 0;
  double l1 = 0, l2 = 0;
  double K1 = 0;

  /// Moment exponent of the Lyapunov bound.
  double p_star() const noexcept { return 4.0 * q - 2.0; }
};

/// Constants for ex1-cubic. l1 and l2 are not part of the published set; 3 and
/// 1.5 satisfy 2 < l1 < b3 / (a4 + a5) and 1 < l2 <= b13.
inline AssumptionConstants ex1_constants() {
  AssumptionConstants c;
  c.q = 3;
  c.a1 = 20;
  c.eps1 = 0;
  c.eps2 = 1;
  c.a2 = c.a3 = c.a4 = 0;
  c.a5 = 2;
  c.a6 = 10;
  c.a7 = c.a8 = 0;
  c.a9 = 1;
  c.b1 = 2;
  c.b2 = 0;
  c.b3 = 10;
  c.b4 = std::pow(18.0, 9) / 10.0;
  c.b5 = 5;
  c.b6 = 0;
  c.b7 = 70;
  c.b8 = 15;
  c.b9 = 100;
  c.b10 = 1;
  c.b11 = 0;
  c.b12 = 20;
  c.b13 = 2;
  c.l1 = 3;
  c.l2 = 1.5;
  c.K1 = 1;
  return c;
}

/// A strict inequality among constants: holds iff lhs > rhs (or lhs >= rhs
/// when `strict` is false).
struct HeaderCheck {
  std::string id;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = true;
  bool holds() const noexcept { return strict ? lhs > rhs : lhs >= rhs; }
};

inline std::vector<HeaderCheck> header_checks(const AssumptionConstants& c) {
  double smallest = std::min({c.a1, c.a2, c.a3, c.a4, c.a5, c.a6, c.a7, c.a8, c.a9, c.eps1, c.eps2, c.b1, c.b2,
                              c.b3, c.b4, c.b5, c.b6, c.b7, c.b8, c.b9, c.b10, c.b11, c.b12, c.b13, c.l1, c.l2, c.K1});
  return {
      {"q >= 2", c.q, 2.0, false},
      {"b1 > b2 + l1(a2 + a3)", c.b1, c.b2 + c.l1 * (c.a2 + c.a3), true},
      {"b3 > l1(a4 + a5)", c.b3, c.l1 * (c.a4 + c.a5), true},
      {"b5 > b6", c.b5, c.b6, true},
      {"b7 > b8", c.b7, c.b8, true},
      {"b10 > b11", c.b10, c.b11, true},
      {"b12 > b13", c.b12, c.b13, true},
      {"l1 > 2", c.l1, 2.0, true},
      {"l2 > 1", c.l2, 1.0, true},
      {"constants nonnegative", smallest, 0.0, false},
  };
}

/// Step-size guard: with constants, the step must satisfy delta < 1 / max(b1, 1).
/// Returns a warning message when no constants are available to check against.
inline std::optional<std::string> check_step_size(double delta, const AssumptionConstants* constants) {
  if (!constants) return "no assumption constants supplied; step " + format_double(delta) + " is not checked";
  const double limit = 1.0 / std::max(constants->b1, 1.0);
  if (!(delta < limit))
    throw UsageError("step " + format_double(delta) + " must be below 1/max(b1, 1) = " + format_double(limit));
  return std::nullopt;
}

}  // namespace sdde
