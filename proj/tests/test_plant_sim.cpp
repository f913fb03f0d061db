#include <gtest/gtest.h>

#include <cmath>

#include "cipherloop/controller.hpp"
#include "cipherloop/plant_sim.hpp"
#include "cipherloop/presets.hpp"

using namespace cipherloop;

TEST(Plant, ScalarRecursion) {
  const PlantModel model{RealMatrix{{0.5}}, RealMatrix{{1.0}}, RealMatrix{{1.0}}, {}, 0.01, false};
  RealVector x{0.0};
  for (int k = 0; k < 3; ++k) x = plant_step(model, x, RealVector{1.0}, k).x_next;
  EXPECT_DOUBLE_EQ(x[0], 1.75);
}

TEST(Plant, OutputComesFromCurrentState) {
  const PlantModel model{RealMatrix{{2.0}}, RealMatrix{{1.0}}, RealMatrix{{3.0}}, RealVector{1.0}, 0.01, false};
  const auto step = plant_step(model, RealVector{2.0}, RealVector{5.0});
  EXPECT_DOUBLE_EQ(step.y[0], 7.0);
  EXPECT_DOUBLE_EQ(step.x_next[0], 9.0);
}

TEST(Plant, ZeroInRestStaysAtRest) {
  const auto model = qube_surrogate();
  RealVector x(4, 0.0);
  for (int k = 0; k < 100; ++k) {
    const auto step = plant_step(model, x, RealVector{0.0}, k);
    ASSERT_EQ(step.y, (RealVector{0.0, 0.0, 1024.0}));
    x = step.x_next;
  }
}

TEST(Plant, Disturbances) {
  const PlantModel model{RealMatrix{{1.0}}, RealMatrix{{0.0}}, RealMatrix{{1.0}}, {}, 0.01, false};
  Disturbance d;
  d.events.push_back({2, 0, 1.0, DisturbanceEvent::Target::output, DisturbanceEvent::Shape::impulse});
  d.events.push_back({4, 0, 0.5, DisturbanceEvent::Target::output, DisturbanceEvent::Shape::step});
  d.events.push_back({1, 0, 3.0, DisturbanceEvent::Target::state, DisturbanceEvent::Shape::impulse});
  RealVector x{0.0};
  const double expected_y[] = {0.0, 0.0, 4.0, 3.0, 3.5, 3.5};
  for (std::uint64_t k = 0; k < 6; ++k) {
    const auto step = plant_step(model, x, RealVector{0.0}, k, &d);
    EXPECT_DOUBLE_EQ(step.y[0], expected_y[k]) << k;
    x = step.x_next;
  }
}

TEST(Plant, ClampRound) {
  EXPECT_EQ(clamp_round(1000.2, -999, 999), 999);
  EXPECT_EQ(clamp_round(0.4, -999, 999), 0);
  EXPECT_EQ(clamp_round(-999.7, -999, 999), -999);
  EXPECT_EQ(clamp_round(-2.5, -999, 999), -3);
  EXPECT_EQ(clamp_round(std::nan(""), -999, 999), 0);
  EXPECT_THROW(clamp_round(0.0, 1, -1), ParameterError);
}

TEST(Plant, ZeroOrderHoldScalar) {
  const auto [ad, bd] = discretize(RealMatrix{{-1.0}}, RealMatrix{{1.0}}, 0.1);
  EXPECT_NEAR(ad(0, 0), std::exp(-0.1), 1e-14);
  EXPECT_NEAR(bd(0, 0), 1.0 - std::exp(-0.1), 1e-14);
}

TEST(Plant, ZeroOrderHoldDoubleIntegrator) {
  const auto [ad, bd] = discretize(RealMatrix{{0.0, 1.0}, {0.0, 0.0}}, RealMatrix{{0.0}, {1.0}}, 0.5);
  EXPECT_NEAR(ad(0, 1), 0.5, 1e-14);
  EXPECT_NEAR(ad(1, 1), 1.0, 1e-14);
  EXPECT_NEAR(bd(0, 0), 0.125, 1e-14);
  EXPECT_NEAR(bd(1, 0), 0.5, 1e-14);
}

TEST(Plant, SurrogateIsUnstableOpenLoop) {
  const auto model = qube_surrogate();
  RealVector x{0.0, 0.01, 0.0, 0.0};
  for (int k = 0; k < 500; ++k) x = plant_step(model, x, RealVector{0.0}, k).x_next;
  EXPECT_GT(std::abs(x[1]), 0.5);
}

TEST(Plant, SurrogateIsStabilizedByQuantizedController) {
  const auto preset = qube_preset();
  const auto spec = preset.spec();
  PlainIntState st = initial_int_state(spec);
  RealVector x = preset.plant_x0;
  const auto s = encode_signals(spec, preset.setpoint.at(0));
  double worst_alpha = 0.0;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const RealVector y = plant_output(preset.plant, x, k, &preset.disturbance);
    const auto step = int_reference_step(spec, st, s, encode_signals(spec, y));
    ASSERT_FALSE(step.overflow) << k;
    const RealVector u = preset.actuator.apply(decode_outputs(spec, step.u, k));
    x = plant_step(preset.plant, x, u, k, &preset.disturbance).x_next;
    st = step.next;
    if (k > 2000) worst_alpha = std::max(worst_alpha, std::abs(x[1]));
  }
  EXPECT_LT(worst_alpha, 5.0 * std::numbers::pi / 180.0);
}
