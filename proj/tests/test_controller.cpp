#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cipherloop/controller.hpp"
#include "cipherloop/presets.hpp"
#include "spec_gen.hpp"

using namespace cipherloop;

namespace {

RealVector v1(double x) { return RealVector{x}; }

}  // namespace

TEST(ReferenceController, StaticGainDelaysOneStep) {
  const RealController ctl{RealMatrix{{0.0}}, RealMatrix{{1.0}}, RealMatrix{{0.5}}, ResetPeriod::infinite()};
  const double errors[] = {1.0, -2.0, 4.0, 0.5};
  RealVector x{0.0};
  for (std::uint64_t k = 0; k < 4; ++k) {
    const auto step = reference_step(ctl, x, v1(errors[k]), v1(0.0), k);
    EXPECT_DOUBLE_EQ(step.u[0], k == 0 ? 0.0 : 0.5 * errors[k - 1]);
    x = step.x_next;
  }
}

TEST(ReferenceController, ResetPiHandRecursion) {
  // dt = 0.002, K_I = 1, K_p = 2, constant unit error, no reset within 4 steps:
  // x[1] = (0.002, 1), x[2] = (0.004, 1), x[3] = (0.006, 1), u[3] = 2.006.
  auto ctl = reset_pi_preset(0.002, 1.0, 2.0, 10).controller;
  RealVector x{0.0, 0.0};
  RealVector u;
  for (std::uint64_t k = 0; k <= 3; ++k) {
    const auto step = reference_step(ctl, x, v1(1.0), v1(0.0), k);
    u = step.u;
    if (k < 3) x = step.x_next;
  }
  EXPECT_NEAR(x[0], 0.006, 1e-15);
  EXPECT_DOUBLE_EQ(x[1], 1.0);
  EXPECT_NEAR(u[0], 2.006, 1e-15);
}

TEST(ReferenceController, ResetZeroesStateEveryPeriod) {
  auto ctl = reset_pi_preset(0.002, 1.0, 2.0, 3).controller;
  RealVector x{0.0, 0.0};
  for (std::uint64_t k = 0; k < 9; ++k) {
    const auto step = reference_step(ctl, x, v1(1.0), v1(0.0), k);
    if ((k + 1) % 3 == 0) {
      EXPECT_EQ(step.x_next, (RealVector{0.0, 0.0}));
    } else {
      EXPECT_NE(step.x_next, (RealVector{0.0, 0.0}));
    }
    x = step.x_next;
  }
  const auto at3 = reference_step(ctl, x, v1(1.0), v1(0.0), 9);
  EXPECT_EQ(at3.u[0], 0.0);
}

TEST(ControllerSpec, UniformScheduleEntries) {
  // reset_pi, m = 8, signal scale 1: state scale 1 + p, output scale 2 + p.
  const auto spec = reset_pi_preset().spec();
  ASSERT_EQ(spec.phases(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    EXPECT_EQ(spec.state_scale[p], (std::vector<int>{1 + static_cast<int>(p), 1 + static_cast<int>(p)}));
    EXPECT_EQ(spec.output_scale[p], (std::vector<int>{2 + static_cast<int>(p)}));
    EXPECT_EQ(spec.c_hat[p], (ResidueMatrix{{256, 512}}));
  }
  // B = (0.01, 1) quantizes to (3/256, 1).
  EXPECT_EQ(spec.a_hat[0], (ResidueMatrix{{256, 0}, {0, 0}}));
  EXPECT_EQ(spec.b_hat[0], (ResidueMatrix{{3}, {256}}));
  EXPECT_EQ(spec.b_hat[1], (ResidueMatrix{{768}, {65536}}));
  EXPECT_EQ(spec.a_hat[2], ResidueMatrix(2, 2, 0));
  EXPECT_EQ(spec.b_hat[2], ResidueMatrix(2, 1, 0));
}

TEST(ControllerSpec, QubeEntriesAreScaledOnlyWhereFractional) {
  const auto preset = qube_preset();
  const auto spec = preset.spec();
  ASSERT_EQ(spec.phases(), 1u);
  EXPECT_EQ(spec.signal_scale, 0);
  EXPECT_EQ(spec.state_scale[0], (std::vector<int>{0, 0, 0, 1}));
  EXPECT_EQ(spec.output_scale[0], (std::vector<int>{1}));

  const double c = 125.0 * std::numbers::pi / 3072.0;
  const std::uint64_t ring = std::uint64_t{1} << 32;
  const auto residue = [&](long double v) {
    const auto r = static_cast<std::int64_t>(std::llround(v * 128.0L));
    return r < 0 ? ring + r : static_cast<std::uint64_t>(r);
  };
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(spec.b_hat[0](i, j), i == j ? 1u : 0u);
    EXPECT_EQ(spec.b_hat[0](3, i), 0u);
  }
  EXPECT_EQ(spec.a_hat[0](3, 0), residue(c * 500.0L));
  EXPECT_EQ(spec.a_hat[0](3, 1), 0u);
  EXPECT_EQ(spec.a_hat[0](3, 2), residue(c * 625.0L));
  EXPECT_EQ(spec.c_hat[0](0, 0), residue(-c * 500.0L));
  EXPECT_EQ(spec.c_hat[0](0, 1), residue(-c * 2.0L));
  EXPECT_EQ(spec.c_hat[0](0, 2), residue(-c * 655.0L));
  EXPECT_EQ(spec.c_hat[0](0, 3), 1u);
}

TEST(ControllerSpec, RejectsRingTooSmallForScale) {
  PresetOverrides o;
  o.n_prime = 8;
  EXPECT_THROW(apply_overrides(qube_preset(), o).spec(), ConfigError);
  o.n_prime = 30;
  try {
    apply_overrides(reset_pi_preset(), o).spec();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scale budget"), std::string::npos);
  }
}

TEST(ControllerSpec, InfinitePeriodNeedsAcyclicA) {
  const RealController integrator{RealMatrix{{1.0}}, RealMatrix{{1.0}}, RealMatrix{{1.0}}, ResetPeriod::infinite()};
  const auto q = quantize_controller(integrator, {12, 4, 40});
  EXPECT_THROW(make_controller_spec(q, 1, ScaleSchedule::minimal), ConfigError);
  EXPECT_THROW(make_controller_spec(q, 1, ScaleSchedule::uniform), ConfigError);
  auto finite = integrator;
  finite.period = ResetPeriod::finite(4);
  EXPECT_NO_THROW(make_controller_spec(quantize_controller(finite, {12, 4, 40}), 1, ScaleSchedule::minimal));
}

TEST(ControllerSpec, EncodedEntriesDecodeToQuantizedEntries) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [q, spec] = testgen::random_controller(rng);
    for (std::size_t p = 0; p < spec.phases(); ++p) {
      for (std::size_t i = 0; i < spec.n_u; ++i) {
        for (std::size_t j = 0; j < spec.n_x; ++j) {
          const int scale = spec.output_scale[p][i] - spec.state_scale[p][j];
          ASSERT_EQ(decode(spec.codec, {spec.c_hat[p](i, j), scale}), q.c(i, j).value());
        }
      }
      if (p + 1 == spec.phases()) continue;
      for (std::size_t i = 0; i < spec.n_x; ++i) {
        for (std::size_t j = 0; j < spec.n_x; ++j) {
          const int scale = spec.state_scale[p + 1][i] - spec.state_scale[p][j];
          ASSERT_EQ(decode(spec.codec, {spec.a_hat[p](i, j), scale}), q.a(i, j).value());
        }
      }
    }
  }
}

TEST(PlaintextBound, KeySizesPerPreset) {
  const auto qube = qube_preset().spec();
  EXPECT_THROW(validate_for_key(qube, 64), ConfigError);
  EXPECT_NO_THROW(validate_for_key(qube, 128));
  EXPECT_NO_THROW(validate_for_key(static_preset().spec(), 64));
  // qube (n' = 32): error 64 bits; x1..3 = 65 bits (B = 1); x4 from two
  // entries of 13 and 14 bits: 80 bits; output: 32-bit residues of negative
  // C entries times 65 bits, four terms: 99 bits.
  const auto qb = plaintext_bound(qube);
  EXPECT_EQ(qb.error_bits, 64u);
  EXPECT_EQ(qb.state_bits, 80u);
  EXPECT_EQ(qb.output_bits, 99u);
  // static (n' = 12, C = 0.5 encoded as 4): 24, 25, 28 bits.
  const auto st = plaintext_bound(static_preset().spec());
  EXPECT_EQ(st.error_bits, 24u);
  EXPECT_EQ(st.state_bits, 25u);
  EXPECT_EQ(st.output_bits, 28u);
  // reset_pi (n' = 40): error 80 bits; phase-1 state 82/89 bits (B = 3, 256);
  // phase-2 state 92/97 bits; output max(92 + 9, 97 + 10) + 1 = 108 bits.
  const auto pi = plaintext_bound(reset_pi_preset().spec());
  EXPECT_EQ(pi.error_bits, 80u);
  EXPECT_EQ(pi.state_bits, 97u);
  EXPECT_EQ(pi.output_bits, 108u);
  EXPECT_NO_THROW(validate_for_key(reset_pi_preset().spec(), 128));
  EXPECT_THROW(validate_for_key(reset_pi_preset().spec(), 64), ConfigError);
}

TEST(PlaintextBound, RandomSpecsFit256BitKeys) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [q, spec] = testgen::random_controller(rng);
    ASSERT_NO_THROW(validate_for_key(spec, 256));
  }
}

TEST(IntController, ZeroStateGivesZeroOutput) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [q, spec] = testgen::random_controller(rng);
    const ResidueVector zero(spec.n_y, 0);
    PlainIntState st = initial_int_state(spec);
    for (int k = 0; k < 6; ++k) {
      const auto step = int_reference_step(spec, st, zero, zero);
      ASSERT_EQ(step.u, ResidueVector(spec.n_u, 0));
      st = step.next;
    }
    ASSERT_EQ(st.x, ResidueVector(spec.n_x, 0));
  }
}

TEST(IntController, DecodesToQuantizedRealRecursion) {
  // Without overflow the integer recursion is the quantized controller applied
  // to quantized signals, exactly.
  std::mt19937_64 rng(14);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto [q, spec] = testgen::random_controller(rng);
    const RealController real = q.as_real();
    PlainIntState st = initial_int_state(spec);
    RealVector x(spec.n_x, 0.0);
    for (std::uint64_t k = 0; k < 12; ++k) {
      RealVector s = testgen::random_signal(spec, rng), y = testgen::random_signal(spec, rng);
      for (auto& v : s) v = quantize_signal(spec, v).value();
      for (auto& v : y) v = quantize_signal(spec, v).value();
      const auto step = int_reference_step(spec, st, encode_signals(spec, s), encode_signals(spec, y));
      if (step.overflow) break;
      const auto ref = reference_step(real, x, s, y, k);
      ASSERT_EQ(decode_outputs(spec, step.u, k), ref.u) << "trial " << trial << " k " << k;
      ASSERT_EQ(decode_state(spec, step.next.x, k + 1), ref.x_next) << "trial " << trial << " k " << k;
      st = step.next;
      x = ref.x_next;
      ++compared;
    }
  }
  EXPECT_GT(compared, 1000);
}

TEST(IntController, ErrorIsDifferenceModRing) {
  const auto spec = static_preset().spec();
  const ResidueVector s{5}, y{7};
  EXPECT_EQ(int_error(spec, s, y), (ResidueVector{4096 - 2}));
}

TEST(IntController, PeriodOneKeepsStateZero) {
  auto preset = reset_pi_preset(0.01, 1.0, 2.0, 1);
  const auto spec = preset.spec();
  PlainIntState st = initial_int_state(spec);
  for (int k = 0; k < 5; ++k) {
    st = int_reference_step(spec, st, encode_signals(spec, v1(1.0)), encode_signals(spec, v1(-0.5))).next;
    EXPECT_EQ(st.x, (ResidueVector{0, 0}));
  }
}

TEST(Quantization, OutputErrorHalvesPerFractionalBit) {
  // Max control deviation of the integer controller from the unquantized one
  // over the same random error sequence, as a function of m.
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> errors(600);
  for (auto& e : errors) e = dist(rng);

  std::vector<double> worst;
  for (unsigned m = 6; m <= 14; ++m) {
    auto preset = reset_pi_preset(0.013, 1.7, 2.3, 3);
    preset.codec = {m + 6, m, 4 * m + 6};
    const auto spec = preset.spec();
    PlainIntState st = initial_int_state(spec);
    RealVector x{0.0, 0.0};
    double max_dev = 0.0;
    for (std::uint64_t k = 0; k < errors.size(); ++k) {
      const auto step = int_reference_step(spec, st, encode_signals(spec, v1(errors[k])), encode_signals(spec, v1(0.0)));
      ASSERT_FALSE(step.overflow);
      const auto ref = reference_step(preset.controller, x, v1(errors[k]), v1(0.0), k);
      max_dev = std::max(max_dev, std::abs(decode_outputs(spec, step.u, k)[0] - ref.u[0]));
      st = step.next;
      x = ref.x_next;
    }
    worst.push_back(max_dev);
  }
  // Least-squares slope of log2(error) against m.
  double sm = 0, se = 0, smm = 0, sme = 0;
  for (std::size_t i = 0; i < worst.size(); ++i) {
    const double m = 6.0 + static_cast<double>(i), e = std::log2(worst[i]);
    sm += m;
    se += e;
    smm += m * m;
    sme += m * e;
  }
  const double n = static_cast<double>(worst.size());
  const double slope = (n * sme - sm * se) / (n * smm - sm * sm);
  EXPECT_GT(slope, -1.3);
  EXPECT_LT(slope, -0.7);
}
