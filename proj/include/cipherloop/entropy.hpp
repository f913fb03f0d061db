#pragma once

#include <sys/random.h>

#include <cerrno>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>

#include "cipherloop/big_uint.hpp"
#include "cipherloop/error.hpp"

namespace cipherloop {

/// Source of random bytes for key generation and encryption randomizers.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

/// Kernel CSPRNG (getrandom(2)).
class SystemEntropy final : public EntropySource {
 public:
  void fill(std::span<std::uint8_t> out) override {
    std::size_t done = 0;
    while (done < out.size()) {
      const ssize_t got = ::getrandom(out.data() + done, out.size() - done, 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("getrandom failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(got);
    }
  }
};

/// Reproducible stream for tests and seeded runs. Not cryptographically secure.
class SeededEntropy final : public EntropySource {
 public:
  explicit SeededEntropy(std::uint64_t seed) : engine_(seed) {}

  void fill(std::span<std::uint8_t> out) override {
    for (auto& byte : out) byte = static_cast<std::uint8_t>(engine_() >> 56);
  }

 private:
  std::mt19937_64 engine_;
};

/// Uniform integer with exactly `bits` significant bits when `force_top` is set.
inline BigUint random_bits(EntropySource& rng, std::size_t bits, bool force_top = false) {
  if (bits == 0) return {};
  std::vector<std::uint8_t> bytes((bits + 7) / 8);
  rng.fill(bytes);
  const std::size_t excess = bytes.size() * 8 - bits;
  bytes[0] = static_cast<std::uint8_t>(bytes[0] & (0xFFu >> excess));
  if (force_top) bytes[0] = static_cast<std::uint8_t>(bytes[0] | (0x80u >> excess));
  return BigUint::from_bytes_be(bytes);
}

/// Uniform integer in [0, bound) by rejection sampling.
inline BigUint random_below(EntropySource& rng, const BigUint& bound) {
  if (bound.is_zero()) throw ParameterError("random_below bound must be positive");
  const std::size_t bits = bound.bit_length();
  for (;;) {
    BigUint candidate = random_bits(rng, bits);
    if (candidate < bound) return candidate;
  }
}

}  // namespace cipherloop
