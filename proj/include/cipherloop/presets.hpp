#pragma once

// Named closed-loop configurations: controller, codec, plant, setpoints and
// disturbances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cipherloop/controller.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/fixed_codec.hpp"
#include "cipherloop/plant_sim.hpp"

namespace cipherloop {

/// Piecewise-constant setpoint.
struct SetpointSchedule {
  RealVector initial;
  std::vector<std::pair<std::uint64_t, RealVector>> changes;  ///< (first step, value), ascending

  const RealVector& at(std::uint64_t k) const {
    const RealVector* current = &initial;
    for (const auto& [step, value] : changes) {
      if (step > k) break;
      current = &value;
    }
    return *current;
  }
};

/// Post-processing of decoded control values before they reach the plant.
struct Actuator {
  double lo = -1e300;
  double hi = 1e300;
  bool round_to_integer = false;

  RealVector apply(const RealVector& u) const {
    RealVector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (round_to_integer) {
        out[i] = static_cast<double>(clamp_round(u[i], static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
      } else {
        out[i] = std::isnan(u[i]) ? 0.0 : std::clamp(u[i], lo, hi);
      }
    }
    return out;
  }
};

struct Preset {
  std::string name;
  RealController controller;
  FixedSpec codec;
  int signal_scale = 1;
  ScaleSchedule schedule = ScaleSchedule::uniform;
  PlantModel plant;
  RealVector plant_x0;
  SetpointSchedule setpoint;
  Disturbance disturbance;
  Actuator actuator;
  std::uint32_t sample_period_us = 10000;
  std::size_t default_key_bits = 256;

  QuantizedController quantized(SaturationCounter* saturation = nullptr) const {
    return quantize_controller(controller, codec, saturation);
  }
  ControllerSpec spec() const { return make_controller_spec(quantized(), signal_scale, schedule); }
};

/// Parameter overrides applied on top of a preset (from flags or a config file).
struct PresetOverrides {
  std::optional<unsigned> n_prime;
  std::optional<unsigned> m;
  std::optional<unsigned> n;
  std::optional<ResetPeriod> period;
  std::optional<std::uint32_t> sample_period_us;
};

inline Preset apply_overrides(Preset p, const PresetOverrides& o) {
  if (o.n) p.codec.n = *o.n;
  if (o.m) p.codec.m = *o.m;
  if (o.n_prime) p.codec.n_prime = *o.n_prime;
  if (o.period) p.controller.period = *o.period;
  if (o.sample_period_us) p.sample_period_us = *o.sample_period_us;
  return p;
}

/// Delay-and-difference stabilizer for the rotary pendulum, with the
/// surrogate plant. Signals are integer encoder counts and are encoded
/// without a fractional scale.
inline Preset qube_preset(const QubeParameters& plant = {}) {
  const double c = 125.0 * std::numbers::pi / 3072.0;
  Preset p;
  p.name = "qube";
  RealMatrix a(4, 4);
  a(3, 0) = c * 500.0;
  a(3, 1) = 0.0;
  a(3, 2) = c * 625.0;
  RealMatrix b(4, 3);
  for (std::size_t i = 0; i < 3; ++i) b(i, i) = 1.0;
  RealMatrix cm{{-c * 500.0, -c * 2.0, -c * 655.0, 1.0}};
  p.controller = {std::move(a), std::move(b), std::move(cm), ResetPeriod::infinite()};
  p.codec = {20, 7, 32};
  p.signal_scale = 0;
  p.schedule = ScaleSchedule::minimal;
  p.plant = qube_surrogate(plant);
  const double deg = std::numbers::pi / 180.0;
  p.plant_x0 = {0.0, 3.0 * deg, 0.0, 0.0};
  p.setpoint.initial = {0.0, 0.0, plant.counts_per_rev / 2.0};
  // A tap on the pendulum tip.
  p.disturbance.events.push_back({500, 1, 10.0 * deg, DisturbanceEvent::Target::state, DisturbanceEvent::Shape::impulse});
  p.actuator = {-999.0, 999.0, true};
  p.sample_period_us = static_cast<std::uint32_t>(std::lround(plant.dt * 1e6));
  p.default_key_bits = 256;
  return p;
}

/// Memoryless gain u[k] = K (s[k-1] - y[k-1]) on a first-order plant. Small
/// enough for 64-bit keys.
inline Preset static_preset(double gain = 0.5) {
  Preset p;
  p.name = "static";
  p.controller = {RealMatrix{{0.0}}, RealMatrix{{1.0}}, RealMatrix{{gain}}, ResetPeriod::infinite()};
  p.codec = {8, 3, 12};
  p.signal_scale = 1;
  p.schedule = ScaleSchedule::minimal;
  p.plant = {RealMatrix{{0.9}}, RealMatrix{{0.5}}, RealMatrix{{1.0}}, {}, 0.01, false};
  p.plant_x0 = {0.0};
  p.setpoint.initial = {4.0};
  p.setpoint.changes.push_back({60, {2.0}});
  p.disturbance.events.push_back({30, 0, 1.5, DisturbanceEvent::Target::state, DisturbanceEvent::Shape::impulse});
  p.actuator = {-15.0, 15.0, false};
  p.sample_period_us = 10000;
  p.default_key_bits = 64;
  return p;
}

/// PI controller whose integrator is reset every T steps:
/// x = [integral, last error], u = K_I·x1 + K_p·x2.
inline Preset reset_pi_preset(double dt = 0.01, double ki = 1.0, double kp = 2.0, std::uint64_t period = 3) {
  Preset p;
  p.name = "reset_pi";
  p.controller = {RealMatrix{{1.0, 0.0}, {0.0, 0.0}}, RealMatrix{{dt}, {1.0}}, RealMatrix{{ki, kp}},
                  ResetPeriod::finite(period)};
  p.codec = {14, 8, 40};
  p.signal_scale = 1;
  p.schedule = ScaleSchedule::uniform;
  p.plant = {RealMatrix{{0.9}}, RealMatrix{{0.1}}, RealMatrix{{1.0}}, {}, dt, false};
  p.plant_x0 = {0.0};
  p.setpoint.initial = {1.0};
  p.setpoint.changes.push_back({100, {-0.5}});
  p.actuator = {-30.0, 30.0, false};
  p.sample_period_us = static_cast<std::uint32_t>(std::lround(dt * 1e6));
  p.default_key_bits = 256;
  return p;
}

inline const std::vector<std::string_view>& preset_names() {
  static const std::vector<std::string_view> names{"qube", "static", "reset_pi"};
  return names;
}

inline Preset preset_by_name(std::string_view name) {
  if (name == "qube") return qube_preset();
  if (name == "static") return static_preset();
  if (name == "reset_pi") return reset_pi_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected qube, static or reset_pi)");
}

}  // namespace cipherloop
