#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdde_bem/errors.hpp"
#include "sdde_bem/model.hpp"

namespace sdde {

/// A history function paired with the name used in configs and report files.
struct NamedHistory {
  std::string name;
  HistoryFn fn;
};

inline NamedHistory constant_history(double value) {
  return {"constant:" + format_double(value), [value](double, std::span<double> out) {
            for (double& v : out) v = value;
          }};
}

/// Histories by name: "cos", "one-plus-cos", "t-minus-one", "constant:<v>".
/// Vector-valued states get the same value in every component.
inline NamedHistory named_history(std::string_view name) {
  auto fill = [](auto scalar) {
    return [scalar](double t, std::span<double> out) {
      for (double& v : out) v = scalar(t);
    };
  };
  if (name == "cos") return {"cos", fill([](double t) { return std::cos(t); })};
  if (name == "one-plus-cos") return {"one-plus-cos", fill([](double t) { return 1.0 + std::cos(t); })};
  if (name == "t-minus-one") return {"t-minus-one", fill([](double t) { return t - 1.0; })};
  constexpr std::string_view prefix = "constant:";
  if (name.starts_with(prefix)) {
    const std::string value(name.substr(prefix.size()));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty() || !std::isfinite(v))
      throw UsageError("bad constant history '" + std::string(name) + "'");
    return constant_history(v);
  }
  throw UsageError("unknown history '" + std::string(name) +
                   "' (expected cos, one-plus-cos, t-minus-one or constant:<value>)");
}

/// Copy of `model` started from a different initial history.
inline SddeModel with_history(SddeModel model, const NamedHistory& history) {
  model.initial_history = history.fn;
  return model;
}

/// dx = (10 - x - 10x^3) dt + x(t-1)^2 dW, x = cos t on [-1, 0].
inline SddeModel make_ex1_cubic() {
  SddeModel model;
  model.name = "ex1-cubic";
  model.d = 1;
  model.m = 1;
  model.tau = 1.0;
  model.drift = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = 10.0 - x[0] - 10.0 * x[0] * x[0] * x[0];
  };
  model.diffusion = [](std::span<const double>, std::span<const double> y, std::span<double> out) {
    out[0] = y[0] * y[0];
  };
  model.drift_jacobian_x = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = -1.0 - 30.0 * x[0] * x[0];
  };
  model.initial_history = [](double t, std::span<double> out) { out[0] = std::cos(t); };
  model.split = DiffusionSplit{
      [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
      [](std::span<const double> y, std::span<double> out) { out[0] = y[0] * y[0]; },
  };
  return model;
}

inline constexpr double kOuRate = 1.0;
inline constexpr double kOuSigma = 0.5;
inline constexpr double kOuStart = 1.0;

/// Ornstein-Uhlenbeck reference: dx = -theta x dt + sigma dW, x = 1 on [-1, 0].
inline SddeModel make_ou_linear() {
  SddeModel model;
  model.name = "ou-linear";
  model.tau = 1.0;
  model.drift = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = -kOuRate * x[0];
  };
  model.diffusion = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    out[0] = kOuSigma;
  };
  model.drift_jacobian_x = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    out[0] = -kOuRate;
  };
  model.initial_history = [](double, std::span<double> out) { out[0] = kOuStart; };
  model.split = DiffusionSplit{
      [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
      [](std::span<const double>, std::span<double> out) { out[0] = kOuSigma; },
  };
  return model;
}

/// dx = -x dt, x = 1 on [-1, 0].
inline SddeModel make_zero_noise_linear() {
  SddeModel model;
  model.name = "zero-noise-linear";
  model.tau = 1.0;
  model.drift = [](std::span<const double> x, std::span<const double>, std::span<double> out) { out[0] = -x[0]; };
  model.diffusion = [](std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  model.drift_jacobian_x = [](std::span<const double>, std::span<const double>, std::span<double> out) {
    out[0] = -1.0;
  };
  model.initial_history = [](double, std::span<double> out) { out[0] = 1.0; };
  model.split = DiffusionSplit{
      [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
      [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
  };
  return model;
}

inline std::vector<SddeModel> builtin_models() {
  return {make_ex1_cubic(), make_ou_linear(), make_zero_noise_linear()};
}

inline SddeModel find_model(std::string_view name) {
  std::string known;
  for (auto& model : builtin_models()) {
    if (model.name == name) return model;
    known += (known.empty() ? "" : ", ") + model.name;
  }
  throw UsageError("unknown model '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace sdde
