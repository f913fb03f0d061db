#pragma once

// Private-key half of the Paillier scheme: key generation, the
// three-modulus decryption pipeline, and key files.

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>

#include "cipherloop/big_uint.hpp"
#include "cipherloop/entropy.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/kv_file.hpp"
#include "cipherloop/mont_arith.hpp"
#include "cipherloop/paillier.hpp"

// Marker checked by the controller-side build to prove it never links this header.
#define CIPHERLOOP_PRIVATE_KEY_MATERIAL 1

namespace cipherloop::paillier {

namespace detail {

inline constexpr std::array<std::uint32_t, 53> kSmallPrimes = {
    3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,  61,  67,
    71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157,
    163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251};

inline std::uint32_t mod_small(const BigUint& v, std::uint32_t d) {
  std::uint32_t r = 0;
  for (std::size_t i = v.limb_count(); i-- > 0;) r = ((r << 16) | v.limb(i)) % d;
  return r;
}

}  // namespace detail

/// Miller-Rabin with `rounds` random bases, using Montgomery exponentiation.
inline bool is_probable_prime(const BigUint& n, EntropySource& rng, int rounds = 64) {
  if (n < BigUint{2}) return false;
  for (const auto p : detail::kSmallPrimes) {
    if (n == BigUint{p}) return true;
    if (detail::mod_small(n, p) == 0) return false;
  }
  if (n == BigUint{2}) return true;
  if (!n.is_odd()) return false;

  const BigUint n_minus_1 = n - BigUint{1};
  std::size_t s = 0;
  while (!n_minus_1.bit(s)) ++s;
  const BigUint d = n_minus_1 >> s;

  const MontCtx ctx(n);
  const BigUint three{3};
  for (int round = 0; round < rounds; ++round) {
    // Base uniform in [2, n-2].
    const BigUint a = random_below(rng, n - three) + BigUint{2};
    MontForm x = ctx.exp(ctx.to_mont(a), d, d.bit_length());
    BigUint plain = ctx.from_mont(x);
    if (plain == BigUint{1} || plain == n_minus_1) continue;
    bool witness = true;
    for (std::size_t i = 1; i < s; ++i) {
      x = ctx.mult(x, x);
      plain = ctx.from_mont(x);
      if (plain == n_minus_1) {
        witness = false;
        break;
      }
      if (plain == BigUint{1}) break;
    }
    if (witness) return false;
  }
  return true;
}

/// Random prime with exactly `bits` bits and its top two bits set, so the
/// product of two such primes has exactly 2·bits bits.
inline BigUint random_prime(std::size_t bits, EntropySource& rng, std::size_t max_attempts = 0) {
  if (bits < 3) throw ParameterError("prime size must be at least 3 bits");
  if (max_attempts == 0) max_attempts = 200 * bits;
  const BigUint second_top = BigUint::power_of_two(bits - 2);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    BigUint candidate = random_bits(rng, bits, /*force_top=*/true);
    if (!candidate.bit(bits - 2)) candidate += second_top;
    if (!candidate.is_odd()) candidate += BigUint{1};
    if (candidate.bit_length() != bits) continue;
    if (is_probable_prime(candidate, rng)) return candidate;
  }
  throw GenerationError("no " + std::to_string(bits) + "-bit prime found after " + std::to_string(max_attempts) +
                        " candidates");
}

class PrivateKey {
 public:
  /// Derives λ, μ and the decryption constants for N = p·q.
  PrivateKey(const PublicKey& pk, BigUint p, BigUint q)
      : n_(pk.n()),
        p_(std::move(p)),
        q_(std::move(q)),
        lambda_(lcm(p_ - BigUint{1}, q_ - BigUint{1})),
        mu_(mod_inverse(lambda_, n_)),
        ctx_n_(n_, pk.word_count()),
        ctx_n2p2_(pk.n_squared() + BigUint{2}, pk.word_count()),
        n_inv_r2_((mod_inverse(n_, ctx_n2p2_.modulus()) * ctx_n2p2_.r2_mod_m()) % ctx_n2p2_.modulus()),
        mu_r2_((mu_ * ctx_n_.r2_mod_m()) % n_) {
    if (p_ * q_ != n_) throw ParameterError("p·q does not match the public modulus");
  }

  const BigUint& n() const noexcept { return n_; }
  const BigUint& p() const noexcept { return p_; }
  const BigUint& q() const noexcept { return q_; }
  const BigUint& lambda() const noexcept { return lambda_; }
  const BigUint& mu() const noexcept { return mu_; }
  const MontCtx& ctx_n() const noexcept { return ctx_n_; }
  const MontCtx& ctx_n2p2() const noexcept { return ctx_n2p2_; }
  /// N^-1·R² mod (N²+2).
  const BigUint& n_inv_r2() const noexcept { return n_inv_r2_; }
  /// μ·R² mod N.
  const BigUint& mu_r2() const noexcept { return mu_r2_; }

 private:
  BigUint n_;
  BigUint p_;
  BigUint q_;
  BigUint lambda_;
  BigUint mu_;
  MontCtx ctx_n_;
  MontCtx ctx_n2p2_;
  BigUint n_inv_r2_;
  BigUint mu_r2_;
};

struct KeyPair {
  PublicKey pub;
  PrivateKey priv;
};

/// Builds a key pair from two distinct primes. Primality is the caller's
/// responsibility; the structural conditions of the scheme are checked.
inline KeyPair keypair_from_primes(BigUint p, BigUint q) {
  if (p == q) throw GenerationError("p and q must be distinct");
  PublicKey pk(p * q);
  const BigUint phi = (p - BigUint{1}) * (q - BigUint{1});
  if (gcd(pk.n(), phi) != BigUint{1}) throw GenerationError("gcd(N, (p-1)(q-1)) != 1");
  PrivateKey sk(pk, std::move(p), std::move(q));
  return {std::move(pk), std::move(sk)};
}

inline KeyPair keygen(std::size_t key_bits, EntropySource& rng, int max_retries = 64) {
  if (!is_supported_key_bits(key_bits)) {
    throw ParameterError("unsupported key length " + std::to_string(key_bits) +
                         " (expected 64, 128, 256, 512 or 1024)");
  }
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    BigUint p = random_prime(key_bits / 2, rng);
    BigUint q = random_prime(key_bits / 2, rng);
    if (p == q) continue;
    if ((p * q).bit_length() != key_bits) continue;
    try {
      return keypair_from_primes(std::move(p), std::move(q));
    } catch (const GenerationError&) {
      continue;
    }
  }
  throw GenerationError("key generation failed after " + std::to_string(max_retries) + " retries");
}

/// L(c^λ mod N²)·μ mod N, evaluated over the moduli N², N²+2 and N.
///
/// The quotient L(u) = (u-1)/N is obtained by a Montgomery multiplication with
/// N^-1 modulo N²+2: because u ≡ 1 (mod N) the quotient is an exact integer
/// below N, so its residue modulo N²+2 is the quotient itself.
inline BigUint decrypt(const PrivateKey& sk, const PublicKey& pk, const Ciphertext& c,
                       ExpSchedule schedule = ExpSchedule::sequential) {
  if (sk.n() != pk.n()) throw ParameterError("private key does not belong to this public key");
  const MontCtx& n2 = pk.ctx_n2();
  const MontCtx& n2p2 = sk.ctx_n2p2();
  const MontCtx& n1 = sk.ctx_n();

  const MontForm t1 = n2.exp(c.value, sk.lambda(), pk.key_bits(), schedule);
  const BigUint u = n2.from_mont(t1);
  // u = 0 only for non-invertible (adversarial) input; wrap instead of underflowing.
  const BigUint u_minus_1 = u.is_zero() ? n2p2.modulus() - BigUint{1} : u - BigUint{1};
  const BigUint t3 = n2p2.mult(u_minus_1, sk.n_inv_r2());
  BigUint quotient = n2p2.from_mont(t3);
  if (quotient >= pk.n()) quotient = quotient % pk.n();
  const BigUint t5 = n1.mult(quotient, sk.mu_r2());
  return n1.from_mont(t5);
}

// Private key file:
//   type = paillier-private
//   n, lambda, mu, p, q = <lowercase hex>
// Written with owner-only permissions.

inline void write_private_key(const std::filesystem::path& path, const KeyPair& keys) {
  namespace fs = std::filesystem;
  {
    std::ofstream touch(path, std::ios::trunc);
    if (!touch) throw IoError("cannot write " + path.string());
  }
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  std::ofstream out(path, std::ios::trunc);
  out << "# cipherloop Paillier private key\n"
      << "type = paillier-private\n"
      << "n = " << keys.pub.n().to_hex() << "\n"
      << "lambda = " << keys.priv.lambda().to_hex() << "\n"
      << "mu = " << keys.priv.mu().to_hex() << "\n"
      << "p = " << keys.priv.p().to_hex() << "\n"
      << "q = " << keys.priv.q().to_hex() << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

inline KeyPair key_pair_from(const KeyValues& kv, std::string_view origin) {
  if (require_key(kv, "type", origin) != "paillier-private") {
    throw ConfigError(std::string(origin) + ": not a Paillier private key file");
  }
  const auto field = [&](std::string_view key) { return BigUint::from_hex(require_key(kv, key, origin)); };
  KeyPair keys = keypair_from_primes(field("p"), field("q"));
  if (keys.pub.n() != field("n") || keys.priv.lambda() != field("lambda") || keys.priv.mu() != field("mu")) {
    throw ConfigError(std::string(origin) + ": stored key fields are inconsistent");
  }
  return keys;
}

inline KeyPair read_key_pair(const std::filesystem::path& path) {
  return key_pair_from(read_key_values(path), path.string());
}

}  // namespace cipherloop::paillier
