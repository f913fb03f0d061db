#pragma once

// Montgomery arithmetic with 16-bit words.
//
// Multiplication is the modified CIOS schedule that omits the final
// conditional subtraction: operands and results live in [0, 2M), and the
// canonical value is recovered only by an explicit multiplication by 1.
// Exponentiation is the right-to-left binary method whose two per-bit
// multiplications are independent and may run on two threads.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cipherloop/big_uint.hpp"
#include "cipherloop/error.hpp"

namespace cipherloop {

namespace detail {

inline std::atomic<std::uint64_t>& mont_mult_counter() noexcept {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// FNV-1a over (w, modulus limbs): equal parameters give equal ids, so
// independently loaded copies of a key interoperate.
inline std::uint64_t ctx_fingerprint(const BigUint& modulus, std::size_t w) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  mix(w);
  for (const auto limb : modulus.limbs()) mix(limb);
  return h;
}

}  // namespace detail

/// Total Montgomery multiplications executed by this process (all threads).
inline std::uint64_t mont_mult_calls() noexcept {
  return detail::mont_mult_counter().load(std::memory_order_relaxed);
}

enum class ExpSchedule {
  sequential,  ///< both multiplications of an iteration on the calling thread
  paired,      ///< squaring on a helper thread, accumulation on the caller
};

class MontCtx;

/// A residue in modified Montgomery form: value < 2M and value ≡ aR (mod M).
class MontForm {
 public:
  MontForm() = default;
  const BigUint& value() const noexcept { return value_; }
  std::uint64_t ctx_id() const noexcept { return ctx_id_; }
  friend bool operator==(const MontForm&, const MontForm&) = default;

 private:
  friend class MontCtx;
  MontForm(BigUint value, std::uint64_t ctx_id) : value_(std::move(value)), ctx_id_(ctx_id) {}

  BigUint value_;
  std::uint64_t ctx_id_ = 0;
};

/// Precomputed parameters for one odd modulus. Immutable, shareable across threads.
class MontCtx {
 public:
  using Limb = BigUint::Limb;

  /// Smallest w with modulus < 2^(16w).
  static std::size_t words_for(const BigUint& modulus) noexcept {
    return (modulus.bit_length() + 15) / 16;
  }

  explicit MontCtx(BigUint modulus) : MontCtx(modulus, words_for(modulus)) {}

  /// Context with an externally chosen word count, so several moduli share R = 2^(16(w+1)).
  MontCtx(BigUint modulus, std::size_t word_count)
      : modulus_(std::move(modulus)), w_(word_count), id_(detail::ctx_fingerprint(modulus_, w_)) {
    if (!modulus_.is_odd()) throw ParameterError("Montgomery modulus must be odd");
    if (modulus_ < BigUint{3}) throw ParameterError("Montgomery modulus must be at least 3");
    if (w_ == 0 || modulus_.bit_length() > 16 * w_) {
      throw ParameterError("modulus does not fit in " + std::to_string(w_) + " 16-bit words");
    }
    m_limbs_.assign(w_ + 1, 0);
    for (std::size_t i = 0; i < modulus_.limb_count(); ++i) m_limbs_[i] = modulus_.limb(i);

    // Newton iteration for M0^-1 mod 2^16; each step doubles the correct bits.
    const std::uint32_t m0 = modulus_.limb(0);
    std::uint32_t inv = m0;
    for (int i = 0; i < 4; ++i) inv = (inv * (2u - m0 * inv)) & 0xFFFFu;
    m_prime_ = static_cast<Limb>((0x10000u - inv) & 0xFFFFu);

    r_mod_m_ = BigUint::power_of_two(radix_exp()) % modulus_;
    r2_mod_m_ = (r_mod_m_ * r_mod_m_) % modulus_;
    two_m_ = modulus_ + modulus_;
  }

  const BigUint& modulus() const noexcept { return modulus_; }
  std::size_t word_count() const noexcept { return w_; }
  Limb m_prime() const noexcept { return m_prime_; }
  std::size_t radix_exp() const noexcept { return 16 * (w_ + 1); }
  const BigUint& r_mod_m() const noexcept { return r_mod_m_; }
  const BigUint& r2_mod_m() const noexcept { return r2_mod_m_; }
  std::uint64_t id() const noexcept { return id_; }

  /// Byte width of a residue on the wire: ceil(16(w+1)/8).
  std::size_t serialized_width() const noexcept { return 2 * (w_ + 1); }

  /// Montgomery form of 1, i.e. R mod M.
  MontForm one() const { return MontForm(r_mod_m_, id_); }

  /// Binds a raw residue (< 2M) to this context without conversion.
  MontForm adopt(BigUint value) const {
    check_operand(value, "residue");
    return MontForm(std::move(value), id_);
  }

  /// T < 2M with T ≡ x·y·R^-1 (mod M). Both operands must be < 2M.
  BigUint mult(const BigUint& x, const BigUint& y) const {
    check_operand(x, "x");
    check_operand(y, "y");
    std::vector<Limb> xs = padded(x);
    std::vector<Limb> ys = padded(y);
    std::vector<Limb> out(w_ + 1, 0);
    std::vector<std::uint32_t> scratch(w_ + 2, 0);
    cios(xs, ys, out, scratch);
    return BigUint::from_limbs(std::move(out));
  }

  MontForm mult(const MontForm& x, const MontForm& y) const {
    check_bound(x);
    check_bound(y);
    return MontForm(mult(x.value(), y.value()), id_);
  }

  /// Montgomery form of a < M, computed as mult(a, R² mod M).
  MontForm to_mont(const BigUint& a) const {
    if (a >= modulus_) throw ParameterError("to_mont operand must be below the modulus");
    return MontForm(mult(a, r2_mod_m_), id_);
  }

  /// Canonical integer (< M) represented by a modified Montgomery residue.
  BigUint from_mont(const BigUint& x) const {
    BigUint t = mult(x, BigUint{1});
    if (t >= modulus_) t -= modulus_;
    return t;
  }

  BigUint from_mont(const MontForm& x) const {
    check_bound(x);
    return from_mont(x.value());
  }

  /// base^exponent in Montgomery form, right-to-left over exactly `exponent_bits` bits.
  ///
  /// Every iteration performs both multiplications; when the exponent bit is 0
  /// the accumulation product is discarded, so the multiplication count is
  /// 2 * exponent_bits for any exponent value.
  MontForm exp(const MontForm& base, const BigUint& exponent, std::size_t exponent_bits,
               ExpSchedule schedule = ExpSchedule::sequential) const {
    check_bound(base);
    if (exponent_bits == 0) throw ParameterError("exponent bit length must be at least 1");
    if (exponent.bit_length() > exponent_bits) {
      throw ParameterError("exponent has " + std::to_string(exponent.bit_length()) +
                           " bits, call site allows " + std::to_string(exponent_bits));
    }
    return schedule == ExpSchedule::paired ? exp_paired(base.value(), exponent, exponent_bits)
                                           : exp_sequential(base.value(), exponent, exponent_bits);
  }

 private:
  void check_operand(const BigUint& v, const char* name) const {
    if (v >= two_m_) {
      throw ParameterError(std::string("Montgomery operand ") + name + " must be below 2M");
    }
  }

  void check_bound(const MontForm& v) const {
    if (v.ctx_id() != id_) throw ParameterError("Montgomery residue belongs to a different context");
  }

  std::vector<Limb> padded(const BigUint& v) const {
    std::vector<Limb> out(w_ + 1, 0);
    for (std::size_t i = 0; i < v.limb_count(); ++i) out[i] = v.limb(i);
    return out;
  }

  // w+1 outer iterations; each folds one 16-bit word of y into t and shifts
  // t right by one word after making its low word zero with m·M.
  void cios(std::span<const Limb> x, std::span<const Limb> y, std::span<Limb> out,
            std::span<std::uint32_t> t) const noexcept {
    detail::mont_mult_counter().fetch_add(1, std::memory_order_relaxed);
    std::fill(t.begin(), t.end(), 0u);
    const std::size_t w = w_;
    for (std::size_t i = 0; i <= w; ++i) {
      const std::uint64_t yi = y[i];
      const std::uint32_t z0 = static_cast<std::uint32_t>((x[0] * yi) & 0xFFFFu);
      const std::uint64_t m = ((t[0] + z0) * std::uint32_t{m_prime_}) & 0xFFFFu;
      std::uint64_t acc = t[0] + x[0] * yi + m * m_limbs_[0];
      std::uint64_t carry = acc >> 16;
      for (std::size_t j = 1; j <= w; ++j) {
        acc = t[j] + x[j] * yi + m * m_limbs_[j] + carry;
        t[j - 1] = static_cast<std::uint32_t>(acc & 0xFFFFu);
        carry = acc >> 16;
      }
      acc = t[w + 1] + carry;
      t[w] = static_cast<std::uint32_t>(acc & 0xFFFFu);
      t[w + 1] = static_cast<std::uint32_t>(acc >> 16);
    }
    for (std::size_t j = 0; j <= w; ++j) out[j] = static_cast<Limb>(t[j]);
  }

  MontForm exp_sequential(const BigUint& base, const BigUint& exponent, std::size_t bits) const {
    std::vector<Limb> power = padded(r_mod_m_);
    std::vector<Limb> square = padded(base);
    std::vector<Limb> product(w_ + 1, 0);
    std::vector<Limb> next_square(w_ + 1, 0);
    std::vector<std::uint32_t> scratch(w_ + 2, 0);
    for (std::size_t i = 0; i < bits; ++i) {
      cios(power, square, product, scratch);
      cios(square, square, next_square, scratch);
      if (exponent.bit(i)) power.swap(product);
      square.swap(next_square);
    }
    return MontForm(BigUint::from_limbs(std::move(power)), id_);
  }

  MontForm exp_paired(const BigUint& base, const BigUint& exponent, std::size_t bits) const {
    std::vector<Limb> power = padded(r_mod_m_);
    std::vector<Limb> square = padded(base);
    std::vector<Limb> product(w_ + 1, 0);
    std::vector<Limb> next_square(w_ + 1, 0);
    std::vector<std::uint32_t> scratch_main(w_ + 2, 0);
    std::vector<std::uint32_t> scratch_helper(w_ + 2, 0);

    std::binary_semaphore start{0};
    std::binary_semaphore done{0};
    bool stop = false;
    std::jthread helper([&] {
      for (;;) {
        start.acquire();
        if (stop) return;
        cios(square, square, next_square, scratch_helper);
        done.release();
      }
    });
    for (std::size_t i = 0; i < bits; ++i) {
      start.release();
      cios(power, square, product, scratch_main);
      done.acquire();
      if (exponent.bit(i)) power.swap(product);
      square.swap(next_square);
    }
    stop = true;
    start.release();
    helper.join();
    return MontForm(BigUint::from_limbs(std::move(power)), id_);
  }

  BigUint modulus_;
  std::size_t w_ = 0;
  std::uint64_t id_ = 0;
  std::vector<Limb> m_limbs_;
  Limb m_prime_ = 0;
  BigUint r_mod_m_;
  BigUint r2_mod_m_;
  BigUint two_m_;
};

}  // namespace cipherloop
