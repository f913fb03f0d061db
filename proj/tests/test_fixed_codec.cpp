#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cipherloop/fixed_codec.hpp"

using namespace cipherloop;

TEST(Quantize, NearestGridPoint) {
  const FixedSpec spec{4, 1, 8};
  EXPECT_DOUBLE_EQ(quantize(spec, 1.3).value(), 1.5);
  EXPECT_DOUBLE_EQ(quantize(spec, 1.0).value(), 1.0);
  EXPECT_DOUBLE_EQ(quantize(spec, -2.5).value(), -2.5);
  EXPECT_DOUBLE_EQ(quantize(spec, 1.2).value(), 1.0);
}

TEST(Quantize, SaturatesAtGridExtremes) {
  const FixedSpec spec{4, 1, 8};
  SaturationCounter sat;
  EXPECT_DOUBLE_EQ(quantize(spec, 100.0, &sat).value(), 3.5);
  EXPECT_DOUBLE_EQ(quantize(spec, -100.0, &sat).value(), -4.0);
  EXPECT_EQ(sat.count(), 2u);
  EXPECT_DOUBLE_EQ(quantize(spec, 3.5, &sat).value(), 3.5);
  EXPECT_DOUBLE_EQ(quantize(spec, -4.0, &sat).value(), -4.0);
  EXPECT_EQ(sat.count(), 2u);
}

TEST(Quantize, TiesRoundAwayFromZero) {
  const FixedSpec spec{4, 1, 8};
  EXPECT_DOUBLE_EQ(quantize(spec, 0.25).value(), 0.5);
  EXPECT_DOUBLE_EQ(quantize(spec, -0.25).value(), -0.5);
  EXPECT_DOUBLE_EQ(quantize(spec, 1.25).value(), 1.5);
  EXPECT_DOUBLE_EQ(quantize(spec, -1.25).value(), -1.5);
}

TEST(Quantize, IntegerGridInsideSameRange) {
  const FixedSpec spec{20, 7, 32};
  const Fixed f = quantize(spec, 1023.6, nullptr, 0u);
  EXPECT_EQ(f.raw, 1024);
  EXPECT_EQ(f.frac_bits, 0u);
  SaturationCounter sat;
  EXPECT_EQ(quantize(spec, 1e6, &sat, 0u).raw, 4095);
  EXPECT_EQ(sat.count(), 1u);
}

TEST(Quantize, ErrorBoundedByHalfStep) {
  std::mt19937_64 rng(1);
  for (unsigned m : {1u, 4u, 7u, 12u}) {
    const FixedSpec spec{m + 10, m, 40};
    std::uniform_real_distribution<double> dist(spec.min_value(), spec.max_value());
    for (int i = 0; i < 10000; ++i) {
      const double x = dist(rng);
      ASSERT_LE(std::abs(x - quantize(spec, x).value()), std::ldexp(1.0, -static_cast<int>(m) - 1));
    }
  }
}

TEST(Encode, NegativeOneAtScaleOne) {
  const FixedSpec spec{16, 7, 32};
  const EncodedInt e = encode(spec, quantize(spec, -1.0), 1);
  EXPECT_EQ(e.residue, (std::uint64_t{1} << 32) - (std::uint64_t{1} << 7));
  EXPECT_DOUBLE_EQ(decode(spec, e), -1.0);
}

TEST(Encode, ZeroAndIntegers) {
  const FixedSpec spec{20, 7, 32};
  for (int s = 0; s < 3; ++s) EXPECT_EQ(encode(spec, Fixed{0, 7}, s).residue, 0u);
  EXPECT_EQ(encode(spec, Fixed{5, 0}, 0).residue, 5u);
  EXPECT_EQ(encode(spec, Fixed{-3, 0}, 0).residue, (std::uint64_t{1} << 32) - 3);
  EXPECT_DOUBLE_EQ(decode(spec, {0, 2}), 0.0);
}

TEST(Encode, RejectsNonIntegerAndOverflow) {
  const FixedSpec spec{16, 7, 32};
  EXPECT_THROW(encode(spec, Fixed{3, 7}, 0), OverflowError);
  EXPECT_NO_THROW(encode(spec, Fixed{256, 7}, 0));
  EXPECT_THROW(encode(spec, Fixed{32767, 7}, 4), OverflowError);
}

TEST(Encode, RoundTripRandomValues) {
  std::mt19937_64 rng(2);
  const FixedSpec spec{16, 8, 48};
  std::uniform_int_distribution<std::int64_t> raw(spec.raw_min(), spec.raw_max());
  for (int s = 1; s <= 3; ++s) {
    for (int i = 0; i < 10000; ++i) {
      const Fixed f{raw(rng), spec.m};
      const EncodedInt e = encode(spec, f, s);
      ASSERT_LT(e.residue, std::uint64_t{1} << spec.n_prime);
      ASSERT_EQ(decode(spec, e), f.value());
    }
  }
}

TEST(Decode, TwosComplementExhaustiveAt12Bits) {
  const FixedSpec spec{8, 3, 12};
  for (std::uint64_t r = 0; r < 4096; ++r) {
    const std::int64_t expected = r < 2048 ? static_cast<std::int64_t>(r) : static_cast<std::int64_t>(r) - 4096;
    ASSERT_EQ(to_signed(spec, r), expected);
    for (int s = 0; s <= 2; ++s) {
      const double v = decode(spec, {r, s});
      ASSERT_EQ(v, std::ldexp(static_cast<double>(expected), -3 * s));
      ASSERT_EQ(encode(spec, Fixed{expected, 0}, 0).residue, r);
    }
  }
}

TEST(ResidueArithmetic, MatchesRationalArithmetic) {
  // Sums at equal scale and products at summed scale decode to the exact results.
  std::mt19937_64 rng(3);
  const FixedSpec spec{12, 5, 40};
  std::uniform_int_distribution<std::int64_t> raw(spec.raw_min(), spec.raw_max());
  const std::uint64_t mask = spec.modulus_mask();
  for (int i = 0; i < 10000; ++i) {
    const Fixed a{raw(rng), spec.m}, b{raw(rng), spec.m};
    const auto ea = encode(spec, a, 1), eb = encode(spec, b, 1), eb2 = encode(spec, b, 2);
    ASSERT_EQ(decode(spec, {(ea.residue + eb.residue) & mask, 1}), a.value() + b.value());
    ASSERT_EQ(decode(spec, {(ea.residue - eb.residue) & mask, 1}), a.value() - b.value());
    const unsigned __int128 prod = static_cast<unsigned __int128>(ea.residue) * eb2.residue;
    ASSERT_EQ(decode(spec, {static_cast<std::uint64_t>(prod) & mask, 3}), a.value() * b.value());
  }
}

TEST(DeriveNPrime, Formula) {
  EXPECT_EQ(derive_n_prime(1, 1, ResetPeriod::finite(1), 8), 27u);
  EXPECT_EQ(derive_n_prime(2, 1, ResetPeriod::finite(3), 14), 3u * 3 + 1 + 14 * 5);
  EXPECT_EQ(derive_n_prime(4, 1, ResetPeriod::finite(2), 20, 32u), 32u);
  EXPECT_EQ(derive_n_prime(4, 1, ResetPeriod::infinite(), 20, 32u), 32u);
  EXPECT_THROW(derive_n_prime(4, 1, ResetPeriod::infinite(), 20), ConfigError);
  EXPECT_THROW(derive_n_prime(4, 1, ResetPeriod::finite(0), 20), ConfigError);
}

TEST(FixedSpec, Validation) {
  EXPECT_NO_THROW((FixedSpec{20, 7, 32}.validate()));
  EXPECT_THROW((FixedSpec{8, 8, 32}.validate()), ConfigError);
  EXPECT_THROW((FixedSpec{20, 7, 8}.validate()), ConfigError);
  EXPECT_THROW((FixedSpec{20, 7, 63}.validate()), ConfigError);
}

TEST(ResetPeriod, PhaseAndReset) {
  const auto t3 = ResetPeriod::finite(3);
  EXPECT_EQ(t3.phase(7), 1u);
  EXPECT_TRUE(t3.resets_after(2));
  EXPECT_FALSE(t3.resets_after(3));
  EXPECT_FALSE(ResetPeriod::infinite().resets_after(2));
  EXPECT_EQ(ResetPeriod::infinite().phase(12345), 0u);
}
