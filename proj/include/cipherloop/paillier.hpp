#pragma once

// Public-key half of the Paillier scheme: everything the controller side may
// hold. Ciphertexts stay in modified Montgomery form modulo N² end to end.
//
// Private-key operations (decryption, key generation) are in
// paillier_private.hpp so that code built only against this header cannot
// reach them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cipherloop/big_uint.hpp"
#include "cipherloop/entropy.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/kv_file.hpp"
#include "cipherloop/mont_arith.hpp"

namespace cipherloop::paillier {

/// Key lengths reachable from the command line and key files.
inline constexpr std::size_t kSupportedKeyBits[] = {64, 128, 256, 512, 1024};

/// Smallest key length accepted outside test builds.
#ifdef CIPHERLOOP_ALLOW_TINY_KEYS
inline constexpr std::size_t kMinKeyBits = 2;
#else
inline constexpr std::size_t kMinKeyBits = 64;
#endif

inline bool is_supported_key_bits(std::size_t bits) {
  for (const auto b : kSupportedKeyBits) {
    if (b == bits) return true;
  }
  return false;
}

/// Shared word count of the three system moduli: smallest w with N²+2 < 2^(16w).
inline std::size_t system_word_count(const BigUint& n) {
  return MontCtx::words_for(n * n + BigUint{2});
}

class PublicKey {
 public:
  explicit PublicKey(BigUint n)
      : n_(validated(std::move(n))),
        n_squared_(n_ * n_),
        ctx_n2_(n_squared_, system_word_count(n_)),
        n_mont_((n_ * ctx_n2_.r_mod_m()) % n_squared_) {}

  const BigUint& n() const noexcept { return n_; }
  const BigUint& n_squared() const noexcept { return n_squared_; }
  std::size_t key_bits() const noexcept { return n_.bit_length(); }
  std::size_t word_count() const noexcept { return ctx_n2_.word_count(); }
  const MontCtx& ctx_n2() const noexcept { return ctx_n2_; }
  /// N·R mod N², the Montgomery form of N.
  const BigUint& n_mont() const noexcept { return n_mont_; }
  std::size_t ciphertext_bytes() const noexcept { return ctx_n2_.serialized_width(); }

  friend bool operator==(const PublicKey& a, const PublicKey& b) noexcept { return a.n_ == b.n_; }

 private:
  static BigUint validated(BigUint n) {
    if (!n.is_odd() || n < BigUint{15}) throw ParameterError("Paillier modulus must be an odd composite >= 15");
    if (n.bit_length() < kMinKeyBits) {
      throw ParameterError("key length " + std::to_string(n.bit_length()) + " below the minimum of " +
                           std::to_string(kMinKeyBits) + " bits");
    }
    return n;
  }

  BigUint n_;
  BigUint n_squared_;
  MontCtx ctx_n2_;
  BigUint n_mont_;
};

struct Ciphertext {
  MontForm value;
  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

/// r^N mod N² in Montgomery form, produced from a raw r without pre-conversion.
struct RandomizerPower {
  MontForm z;
};

/// Randomizer input r uniform in [1, N). For keys under 64 bits gcd(r, N) = 1
/// is enforced; for real key lengths a non-unit r is negligibly likely.
inline BigUint sample_randomizer_input(const PublicKey& pk, EntropySource& rng) {
  for (;;) {
    BigUint r = random_below(rng, pk.n());
    if (r.is_zero()) continue;
    if (pk.key_bits() < 64 && gcd(r, pk.n()) != BigUint{1}) continue;
    return r;
  }
}

/// Treats r as if it already were a Montgomery residue: the result is the
/// Montgomery form of (r·R^-1 mod N)^N, a valid randomizer power since
/// r ↦ r·R^-1 mod N is a bijection on Z_N.
inline RandomizerPower calc_randomizer(const PublicKey& pk, const BigUint& r,
                                       ExpSchedule schedule = ExpSchedule::sequential) {
  if (r >= pk.n()) throw ParameterError("randomizer input must be below N");
  const MontCtx& ctx = pk.ctx_n2();
  return {ctx.exp(ctx.adopt(r), pk.n(), pk.key_bits(), schedule)};
}

inline RandomizerPower sample_randomizer(const PublicKey& pk, EntropySource& rng,
                                         ExpSchedule schedule = ExpSchedule::sequential) {
  return calc_randomizer(pk, sample_randomizer_input(pk, rng), schedule);
}

/// Montgomery form of 1: randomizer for deterministic (r = 1) encryption.
inline RandomizerPower unit_randomizer(const PublicKey& pk) { return {pk.ctx_n2().one()}; }

/// Montgomery form of (N·t + 1)·r^N mod N², using three multiplications.
inline Ciphertext encrypt(const PublicKey& pk, const BigUint& t, const RandomizerPower& z) {
  if (t >= pk.n()) throw ParameterError("plaintext must be below N");
  const MontCtx& ctx = pk.ctx_n2();
  // mult(NR, t) = N·t mod N² (plain form); the +1 then makes N·t + 1.
  const BigUint var1 = ctx.mult(pk.n_mont(), t);
  const BigUint var2 = ctx.mult(var1 + BigUint{1}, ctx.r2_mod_m());
  return {ctx.adopt(ctx.mult(z.z.value(), var2))};
}

inline Ciphertext encrypt(const PublicKey& pk, const BigUint& t, EntropySource& rng) {
  return encrypt(pk, t, sample_randomizer(pk, rng));
}

inline Ciphertext encrypt_deterministic(const PublicKey& pk, const BigUint& t) {
  return encrypt(pk, t, unit_randomizer(pk));
}

/// R mod N²: the encryption of 0 with r = 1, used as the reset state.
inline Ciphertext encrypt_zero_unit(const PublicKey& pk) { return {pk.ctx_n2().one()}; }

/// Decrypts to (t1 + t2) mod N.
inline Ciphertext hom_add(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2) {
  return {pk.ctx_n2().mult(c1.value, c2.value)};
}

/// Decrypts to (t·t_c) mod N. `exponent_bits` is the call site's fixed exponent width.
inline Ciphertext hom_scale(const PublicKey& pk, const BigUint& t, const Ciphertext& c,
                            std::size_t exponent_bits, ExpSchedule schedule = ExpSchedule::sequential) {
  if (t >= pk.n()) throw ParameterError("scalar must be below N");
  return {pk.ctx_n2().exp(c.value, t, exponent_bits, schedule)};
}

inline Ciphertext hom_scale(const PublicKey& pk, const BigUint& t, const Ciphertext& c) {
  return hom_scale(pk, t, c, pk.key_bits());
}

/// Fixed-width big-endian bytes of the Montgomery residue (< 2N²).
inline std::vector<std::uint8_t> serialize(const PublicKey& pk, const Ciphertext& c) {
  return c.value.value().to_bytes_be(pk.ciphertext_bytes());
}

inline Ciphertext deserialize(const PublicKey& pk, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != pk.ciphertext_bytes()) {
    throw ProtocolError("ciphertext must be " + std::to_string(pk.ciphertext_bytes()) + " bytes, got " +
                        std::to_string(bytes.size()));
  }
  BigUint value = BigUint::from_bytes_be(bytes);
  if (value >= pk.n_squared() + pk.n_squared()) throw ProtocolError("ciphertext residue out of range");
  return {pk.ctx_n2().adopt(std::move(value))};
}

/// Canonical residue (< N²) of a ciphertext, for inspection only.
inline BigUint canonical(const PublicKey& pk, const Ciphertext& c) { return pk.ctx_n2().from_mont(c.value); }

// Public key file:
//   type = paillier-public
//   n = <lowercase hex>

inline void write_public_key(const std::filesystem::path& path, const PublicKey& pk) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# cipherloop Paillier public key\n"
      << "type = paillier-public\n"
      << "n = " << pk.n().to_hex() << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

inline PublicKey public_key_from(const KeyValues& kv, std::string_view origin) {
  const auto& type = require_key(kv, "type", origin);
  if (type != "paillier-public" && type != "paillier-private") {
    throw ConfigError(std::string(origin) + ": not a Paillier key file");
  }
  return PublicKey(BigUint::from_hex(require_key(kv, "n", origin)));
}

inline PublicKey read_public_key(const std::filesystem::path& path) {
  return public_key_from(read_key_values(path), path.string());
}

}  // namespace cipherloop::paillier
