#pragma once

// Discrete-time linear plant with sample-and-hold input, scheduled
// disturbances, and a linearized rotary-pendulum surrogate for the QUBE rig.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cipherloop/error.hpp"
#include "cipherloop/matrix.hpp"

namespace cipherloop {

struct PlantModel {
  RealMatrix a;              ///< state transition over one sample period
  RealMatrix b;              ///< input matrix
  RealMatrix c;              ///< output matrix
  RealVector output_offset;  ///< added to C·x (e.g. encoder zero position)
  double dt = 0.01;          ///< sample period [s]
  bool integer_outputs = false;  ///< round outputs to whole sensor counts

  std::size_t n_states() const noexcept { return a.rows(); }
  std::size_t n_inputs() const noexcept { return b.cols(); }
  std::size_t n_outputs() const noexcept { return c.rows(); }

  void check() const {
    require_shape(a.rows() == a.cols(), "plant A must be square");
    require_shape(b.rows() == a.rows(), "plant B rows");
    require_shape(c.cols() == a.rows(), "plant C columns");
    require_shape(output_offset.empty() || output_offset.size() == c.rows(), "plant output offset");
    if (!(dt > 0.0)) throw ConfigError("plant sample period must be positive");
  }
};

struct DisturbanceEvent {
  enum class Target { output, state };
  enum class Shape { impulse, step };

  std::uint64_t step = 0;
  std::size_t channel = 0;
  double magnitude = 0.0;
  Target target = Target::output;
  Shape shape = Shape::impulse;
};

/// Finite schedule of additive disturbances.
struct Disturbance {
  std::vector<DisturbanceEvent> events;

  double at(DisturbanceEvent::Target target, std::size_t channel, std::uint64_t k) const {
    double total = 0.0;
    for (const auto& e : events) {
      if (e.target != target || e.channel != channel) continue;
      const bool active = e.shape == DisturbanceEvent::Shape::impulse ? e.step == k : e.step <= k;
      if (active) total += e.magnitude;
    }
    return total;
  }
};

/// y[k] = C x[k] + offset + output disturbance, optionally rounded.
inline RealVector plant_output(const PlantModel& model, const RealVector& x, std::uint64_t k = 0,
                               const Disturbance* disturbance = nullptr) {
  RealVector y = multiply(model.c, x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!model.output_offset.empty()) y[i] += model.output_offset[i];
    if (disturbance) y[i] += disturbance->at(DisturbanceEvent::Target::output, i, k);
    if (model.integer_outputs) y[i] = std::round(y[i]);
  }
  return y;
}

struct PlantStep {
  RealVector x_next;
  RealVector y;
};

/// Output at x, then x⁺ = A x + B u (+ state disturbance at step k).
inline PlantStep plant_step(const PlantModel& model, const RealVector& x, const RealVector& u, std::uint64_t k = 0,
                            const Disturbance* disturbance = nullptr) {
  model.check();
  require_shape(x.size() == model.n_states(), "plant state");
  require_shape(u.size() == model.n_inputs(), "plant input");
  PlantStep out;
  out.y = plant_output(model, x, k, disturbance);
  out.x_next = multiply(model.a, x);
  const RealVector bu = multiply(model.b, u);
  for (std::size_t i = 0; i < out.x_next.size(); ++i) {
    out.x_next[i] += bu[i];
    if (disturbance) out.x_next[i] += disturbance->at(DisturbanceEvent::Target::state, i, k);
  }
  return out;
}

/// Nearest integer, clamped to [lo, hi].
inline std::int64_t clamp_round(double u, std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw ParameterError("clamp range is empty");
  if (std::isnan(u)) return std::clamp<std::int64_t>(0, lo, hi);
  const double r = std::round(u);
  if (r <= static_cast<double>(lo)) return lo;
  if (r >= static_cast<double>(hi)) return hi;
  return static_cast<std::int64_t>(r);
}

/// Zero-order-hold discretization of x' = Ac x + Bc u over dt.
inline std::pair<RealMatrix, RealMatrix> discretize(const RealMatrix& ac, const RealMatrix& bc, double dt) {
  require_shape(ac.rows() == ac.cols() && bc.rows() == ac.rows(), "continuous model");
  const auto n = static_cast<Eigen::Index>(ac.rows());
  const auto p = static_cast<Eigen::Index>(bc.cols());
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + p, n + p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) aug(i, j) = ac(i, j) * dt;
    for (Eigen::Index j = 0; j < p; ++j) aug(i, n + j) = bc(i, j) * dt;
  }
  const Eigen::MatrixXd e = aug.exp();
  RealMatrix ad(ac.rows(), ac.cols());
  RealMatrix bd(bc.rows(), bc.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) ad(i, j) = e(i, j);
    for (Eigen::Index j = 0; j < p; ++j) bd(i, j) = e(i, n + j);
  }
  return {ad, bd};
}

/// Physical parameters of the rotary-pendulum surrogate. These are nominal
/// values for a small desktop rig, not measured from any particular unit.
struct QubeParameters {
  double motor_resistance = 8.4;   // Rm [ohm]
  double torque_constant = 0.042;  // kt [N·m/A]
  double emf_constant = 0.042;     // km [V·s/rad]
  double arm_mass = 0.095;         // [kg]
  double arm_length = 0.085;       // [m]
  double arm_damping = 0.0015;     // [N·m·s/rad]
  double pendulum_mass = 0.024;    // [kg]
  double pendulum_length = 0.129;  // [m]
  double pendulum_damping = 0.0005;
  double gravity = 9.81;
  /// Motor voltage per duty-cycle count of the control input.
  double volts_per_count = 0.03;
  double dt = 0.002;
  double counts_per_rev = 2048.0;
};

/// Upright-linearized rotary pendulum with states [θ, α, θ', α'] in radians,
/// outputs [θ, θ, α] in encoder counts and α measured from the hanging
/// position (upright reads counts_per_rev/2).
inline PlantModel qube_surrogate(const QubeParameters& q = {}) {
  const double jr = q.arm_mass * q.arm_length * q.arm_length / 12.0;
  const double jp = q.pendulum_mass * q.pendulum_length * q.pendulum_length / 12.0;
  const double half = q.pendulum_length / 2.0;
  const double mp = q.pendulum_mass;
  const double lr = q.arm_length;
  const double jt = jr * jp + mp * half * half * jr + jp * mp * lr * lr;

  RealMatrix ac(4, 4);
  ac(0, 2) = 1.0;
  ac(1, 3) = 1.0;
  ac(2, 1) = mp * mp * half * half * lr * q.gravity / jt;
  ac(2, 2) = -q.arm_damping * (jp + mp * half * half) / jt;
  ac(2, 3) = mp * half * lr * q.pendulum_damping / jt;
  ac(3, 1) = mp * q.gravity * half * (jr + mp * lr * lr) / jt;
  ac(3, 2) = -mp * half * lr * q.arm_damping / jt;
  ac(3, 3) = -q.pendulum_damping * (jr + mp * lr * lr) / jt;
  RealMatrix bc(4, 1);
  bc(2, 0) = (jp + mp * half * half) / jt;
  bc(3, 0) = mp * half * lr / jt;
  // Voltage drive: τ = kt (V - km θ') / Rm.
  const double back_emf = q.torque_constant * q.emf_constant / q.motor_resistance;
  ac(2, 2) -= back_emf * bc(2, 0);
  ac(3, 2) -= back_emf * bc(3, 0);
  const double drive = q.torque_constant / q.motor_resistance * q.volts_per_count;
  bc(2, 0) *= drive;
  bc(3, 0) *= drive;

  auto [ad, bd] = discretize(ac, bc, q.dt);
  const double counts = q.counts_per_rev / (2.0 * std::numbers::pi);
  RealMatrix c(3, 4);
  c(0, 0) = counts;
  c(1, 0) = counts;
  c(2, 1) = -counts;
  PlantModel model{std::move(ad), std::move(bd), std::move(c), {0.0, 0.0, q.counts_per_rev / 2.0}, q.dt, true};
  model.check();
  return model;
}

}  // namespace cipherloop
