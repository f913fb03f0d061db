#pragma once

// Quick end-to-end checks runnable from the command line, using only the
// library itself (the test suite uses an independent big-integer oracle).

#include <functional>
#include <string>
#include <vector>

#include "cipherloop/closed_loop.hpp"
#include "cipherloop/entropy.hpp"
#include "cipherloop/fixed_codec.hpp"
#include "cipherloop/mont_arith.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/paillier_private.hpp"
#include "cipherloop/presets.hpp"

namespace cipherloop {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline std::vector<SelfTestResult> run_selftest(std::uint64_t seed = 1) {
  std::vector<SelfTestResult> results;
  const auto check = [&](std::string name, const std::function<std::string()>& body) {
    try {
      const std::string failure = body();
      results.push_back({std::move(name), failure.empty(), failure});
    } catch (const std::exception& e) {
      results.push_back({std::move(name), false, e.what()});
    }
  };
  SeededEntropy rng(seed);
  const paillier::KeyPair keys = paillier::keygen(64, rng);
  const auto& pk = keys.pub;

  check("montgomery product", [&]() -> std::string {
    const MontCtx& ctx = pk.ctx_n2();
    const BigUint r_inv = mod_inverse(BigUint::power_of_two(ctx.radix_exp()) % ctx.modulus(), ctx.modulus());
    for (int i = 0; i < 1000; ++i) {
      const BigUint x = random_below(rng, ctx.modulus() + ctx.modulus());
      const BigUint y = random_below(rng, ctx.modulus() + ctx.modulus());
      if (ctx.mult(x, y) % ctx.modulus() != (x * y % ctx.modulus()) * r_inv % ctx.modulus()) return "x·y·R⁻¹ mismatch";
    }
    return {};
  });
  check("constant multiplication count", [&]() -> std::string {
    const MontCtx& ctx = pk.ctx_n2();
    const MontForm base = ctx.to_mont(BigUint{7});
    std::uint64_t first = 0;
    for (const auto& e : {BigUint{}, BigUint::power_of_two(32) - BigUint{1}, BigUint{0x80000001u}}) {
      const auto before = mont_mult_calls();
      ctx.exp(base, e, 32);
      const auto used = mont_mult_calls() - before;
      if (first == 0) first = used;
      if (used != first || used != 64) return "count " + std::to_string(used);
    }
    return {};
  });
  check("paillier round trip", [&]() -> std::string {
    for (int i = 0; i < 200; ++i) {
      const BigUint t = random_below(rng, pk.n());
      if (paillier::decrypt(keys.priv, pk, paillier::encrypt(pk, t, rng)) != t) return "decrypt(encrypt(t)) != t";
    }
    return {};
  });
  check("homomorphic add and scale", [&]() -> std::string {
    for (int i = 0; i < 100; ++i) {
      const BigUint a = random_below(rng, pk.n()), b = random_below(rng, pk.n());
      const auto ca = paillier::encrypt(pk, a, rng), cb = paillier::encrypt(pk, b, rng);
      if (paillier::decrypt(keys.priv, pk, paillier::hom_add(pk, ca, cb)) != (a + b) % pk.n()) return "add";
      if (paillier::decrypt(keys.priv, pk, paillier::hom_scale(pk, b, ca)) != a * b % pk.n()) return "scale";
    }
    return {};
  });
  check("fixed-point codec", [&]() -> std::string {
    const FixedSpec spec{20, 7, 32};
    for (std::int64_t raw = spec.raw_min(); raw <= spec.raw_max(); raw += 97) {
      const Fixed f{raw, spec.m};
      if (decode(spec, encode(spec, f, 1)) != f.value()) return "round trip at raw " + std::to_string(raw);
    }
    return {};
  });
  check("encrypted loop equals integer controller", [&]() -> std::string {
    const Preset preset = static_preset();
    LoopOptions options;
    options.steps = 50;
    options.seed = seed;
    const LoopResult run = run_in_process(preset, preset.spec(), keys, options);
    if (!run.summary.equivalent()) return std::to_string(run.summary.mismatched) + " mismatched steps";
    return {};
  });
  return results;
}

}  // namespace cipherloop
