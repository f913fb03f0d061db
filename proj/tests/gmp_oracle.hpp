#pragma once

// Conversions between BigUint and GMP integers for oracle checks.

#include <gmpxx.h>

#include <cstdint>
#include <random>
#include <string>

#include "cipherloop/big_uint.hpp"

namespace oracle {

inline mpz_class to_mpz(const cipherloop::BigUint& v) { return mpz_class(v.to_hex(), 16); }

inline cipherloop::BigUint from_mpz(const mpz_class& v) { return cipherloop::BigUint::from_hex(v.get_str(16)); }

inline mpz_class pow2(unsigned long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, e);
  return r;
}

inline mpz_class powm(const mpz_class& b, const mpz_class& e, const mpz_class& m) {
  mpz_class r;
  mpz_powm(r.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return r;
}

inline mpz_class invert(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) == 0) throw std::domain_error("not invertible");
  return r;
}

inline mpz_class mod(const mpz_class& a, const mpz_class& m) {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
  return r;
}

/// x·y·R^-1 mod M, computed with a modular inverse rather than Montgomery reduction.
inline mpz_class mont_product(const mpz_class& x, const mpz_class& y, const mpz_class& m, unsigned long radix_exp) {
  return mod(x * y * invert(pow2(radix_exp), m), m);
}

class Random {
 public:
  explicit Random(unsigned long seed) { state_.seed(seed); }
  mpz_class bits(unsigned long n) { return state_.get_z_bits(n); }
  mpz_class below(const mpz_class& bound) { return state_.get_z_range(bound); }
  /// Random odd modulus with exactly `n` bits.
  mpz_class odd_modulus(unsigned long n) {
    mpz_class v = bits(n);
    mpz_setbit(v.get_mpz_t(), n - 1);
    mpz_setbit(v.get_mpz_t(), 0);
    return v;
  }
  /// Random prime with exactly `n` bits.
  mpz_class prime(unsigned long n) {
    for (;;) {
      mpz_class v = bits(n);
      mpz_setbit(v.get_mpz_t(), n - 1);
      mpz_setbit(v.get_mpz_t(), n - 2);
      mpz_class p;
      mpz_nextprime(p.get_mpz_t(), v.get_mpz_t());
      if (mpz_sizeinbase(p.get_mpz_t(), 2) == n) return p;
    }
  }

 private:
  gmp_randclass state_{gmp_randinit_mt};
};

}  // namespace oracle
