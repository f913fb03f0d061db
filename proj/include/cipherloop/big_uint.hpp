#pragma once

// Arbitrary-precision unsigned integers with 16-bit limbs.
//
// Only the operations the cryptosystem needs are provided: comparison,
// add/sub, schoolbook multiply, shifts, shift-subtract division and the
// number-theory helpers used by key generation. Hot-path modular arithmetic
// lives in mont_arith.hpp and works on the limb spans directly.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cipherloop/error.hpp"

namespace cipherloop {

class BigUint {
 public:
  using Limb = std::uint16_t;
  static constexpr std::size_t kLimbBits = 16;

  BigUint() = default;

  // Implicit on purpose: small constants appear everywhere in the protocol.
  BigUint(std::uint64_t value) {  // NOLINT(google-explicit-constructor)
    while (value != 0) {
      limbs_.push_back(static_cast<Limb>(value & 0xFFFFu));
      value >>= kLimbBits;
    }
  }

  static BigUint from_limbs(std::vector<Limb> limbs) {
    BigUint out;
    out.limbs_ = std::move(limbs);
    out.normalize();
    return out;
  }

  static BigUint power_of_two(std::size_t exponent) {
    BigUint out;
    out.limbs_.assign(exponent / kLimbBits + 1, 0);
    out.limbs_.back() = static_cast<Limb>(1u << (exponent % kLimbBits));
    return out;
  }

  /// Parses lowercase or uppercase hexadecimal without prefix. Empty input is rejected.
  static BigUint from_hex(std::string_view hex) {
    if (hex.empty()) throw ParameterError("empty hexadecimal string");
    BigUint out;
    out.limbs_.assign((hex.size() + 3) / 4, 0);
    std::size_t nibble = 0;
    for (auto it = hex.rbegin(); it != hex.rend(); ++it, ++nibble) {
      const int digit = hex_digit(*it);
      if (digit < 0) throw ParameterError("invalid hexadecimal digit in '" + std::string(hex) + "'");
      out.limbs_[nibble / 4] |= static_cast<Limb>(digit << (4 * (nibble % 4)));
    }
    out.normalize();
    return out;
  }

  static BigUint from_bytes_be(std::span<const std::uint8_t> bytes) {
    BigUint out;
    out.limbs_.assign((bytes.size() + 1) / 2, 0);
    std::size_t pos = 0;
    for (auto it = bytes.rbegin(); it != bytes.rend(); ++it, ++pos) {
      out.limbs_[pos / 2] |= static_cast<Limb>(*it << (8 * (pos % 2)));
    }
    out.normalize();
    return out;
  }

  std::string to_hex() const {
    if (is_zero()) return "0";
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
      for (int shift = 12; shift >= 0; shift -= 4) {
        out.push_back(kDigits[(limbs_[i] >> shift) & 0xF]);
      }
    }
    const auto first = out.find_first_not_of('0');
    return out.substr(first);
  }

  /// Fixed-width big-endian encoding; throws if the value needs more bytes.
  std::vector<std::uint8_t> to_bytes_be(std::size_t width) const {
    if ((bit_length() + 7) / 8 > width) {
      throw ParameterError("value does not fit in " + std::to_string(width) + " bytes");
    }
    std::vector<std::uint8_t> out(width, 0);
    for (std::size_t pos = 0; pos < width && pos / 2 < limbs_.size(); ++pos) {
      out[width - 1 - pos] = static_cast<std::uint8_t>(limbs_[pos / 2] >> (8 * (pos % 2)));
    }
    return out;
  }

  std::uint64_t to_u64() const {
    if (bit_length() > 64) throw ParameterError("value exceeds 64 bits");
    std::uint64_t out = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) out = (out << kLimbBits) | limbs_[i];
    return out;
  }

  bool is_zero() const noexcept { return limbs_.empty(); }
  bool is_odd() const noexcept { return !limbs_.empty() && (limbs_[0] & 1u) != 0; }

  std::size_t bit_length() const noexcept {
    if (limbs_.empty()) return 0;
    const auto top = static_cast<unsigned>(limbs_.back());
    std::size_t top_bits = 0;
    for (unsigned v = top; v != 0; v >>= 1) ++top_bits;
    return (limbs_.size() - 1) * kLimbBits + top_bits;
  }

  bool bit(std::size_t index) const noexcept {
    const std::size_t word = index / kLimbBits;
    if (word >= limbs_.size()) return false;
    return ((limbs_[word] >> (index % kLimbBits)) & 1u) != 0;
  }

  std::size_t limb_count() const noexcept { return limbs_.size(); }
  Limb limb(std::size_t index) const noexcept { return index < limbs_.size() ? limbs_[index] : Limb{0}; }
  std::span<const Limb> limbs() const noexcept { return limbs_; }

  friend bool operator==(const BigUint&, const BigUint&) = default;

  friend std::strong_ordering operator<=>(const BigUint& a, const BigUint& b) noexcept {
    if (a.limbs_.size() != b.limbs_.size()) return a.limbs_.size() <=> b.limbs_.size();
    for (std::size_t i = a.limbs_.size(); i-- > 0;) {
      if (a.limbs_[i] != b.limbs_[i]) return a.limbs_[i] <=> b.limbs_[i];
    }
    return std::strong_ordering::equal;
  }

  BigUint& operator+=(const BigUint& rhs) {
    if (limbs_.size() < rhs.limbs_.size()) limbs_.resize(rhs.limbs_.size(), 0);
    std::uint32_t carry = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      const std::uint32_t sum = std::uint32_t{limbs_[i]} + rhs.limb(i) + carry;
      limbs_[i] = static_cast<Limb>(sum);
      carry = sum >> kLimbBits;
      if (carry == 0 && i >= rhs.limbs_.size()) break;
    }
    if (carry != 0) limbs_.push_back(static_cast<Limb>(carry));
    return *this;
  }

  /// Requires *this >= rhs.
  BigUint& operator-=(const BigUint& rhs) {
    if (*this < rhs) throw ParameterError("BigUint subtraction would underflow");
    std::int32_t borrow = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      std::int32_t diff = std::int32_t{limbs_[i]} - rhs.limb(i) - borrow;
      borrow = diff < 0 ? 1 : 0;
      if (borrow != 0) diff += 1 << kLimbBits;
      limbs_[i] = static_cast<Limb>(diff);
      if (borrow == 0 && i >= rhs.limbs_.size()) break;
    }
    normalize();
    return *this;
  }

  BigUint& operator<<=(std::size_t shift) {
    if (is_zero() || shift == 0) return *this;
    const std::size_t words = shift / kLimbBits;
    const std::size_t bits = shift % kLimbBits;
    std::vector<Limb> out(limbs_.size() + words + 1, 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
      const std::uint32_t v = std::uint32_t{limbs_[i]} << bits;
      out[i + words] |= static_cast<Limb>(v);
      out[i + words + 1] |= static_cast<Limb>(v >> kLimbBits);
    }
    limbs_ = std::move(out);
    normalize();
    return *this;
  }

  BigUint& operator>>=(std::size_t shift) {
    const std::size_t words = shift / kLimbBits;
    const std::size_t bits = shift % kLimbBits;
    if (words >= limbs_.size()) {
      limbs_.clear();
      return *this;
    }
    std::vector<Limb> out(limbs_.size() - words, 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t v = limbs_[i + words] >> bits;
      if (bits != 0 && i + words + 1 < limbs_.size()) {
        v |= std::uint32_t{limbs_[i + words + 1]} << (kLimbBits - bits);
      }
      out[i] = static_cast<Limb>(v);
    }
    limbs_ = std::move(out);
    normalize();
    return *this;
  }

  friend BigUint operator+(BigUint a, const BigUint& b) { return a += b; }
  friend BigUint operator-(BigUint a, const BigUint& b) { return a -= b; }
  friend BigUint operator<<(BigUint a, std::size_t s) { return a <<= s; }
  friend BigUint operator>>(BigUint a, std::size_t s) { return a >>= s; }

  friend BigUint operator*(const BigUint& a, const BigUint& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Limb> out(a.limbs_.size() + b.limbs_.size(), 0);
    for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
      std::uint64_t carry = 0;
      const std::uint64_t ai = a.limbs_[i];
      for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
        const std::uint64_t cur = out[i + j] + ai * b.limbs_[j] + carry;
        out[i + j] = static_cast<Limb>(cur);
        carry = cur >> kLimbBits;
      }
      std::size_t k = i + b.limbs_.size();
      while (carry != 0) {
        const std::uint64_t cur = out[k] + carry;
        out[k++] = static_cast<Limb>(cur);
        carry = cur >> kLimbBits;
      }
    }
    return from_limbs(std::move(out));
  }

  /// Shift-subtract long division. Cost scales with the quotient's bit length.
  static std::pair<BigUint, BigUint> divmod(const BigUint& dividend, const BigUint& divisor) {
    if (divisor.is_zero()) throw ParameterError("division by zero");
    if (dividend < divisor) return {BigUint{}, dividend};
    const std::size_t shift = dividend.bit_length() - divisor.bit_length();
    BigUint remainder = dividend;
    BigUint shifted = divisor << shift;
    std::vector<Limb> quotient(shift / kLimbBits + 1, 0);
    for (std::size_t i = shift + 1; i-- > 0;) {
      if (remainder >= shifted) {
        remainder -= shifted;
        quotient[i / kLimbBits] |= static_cast<Limb>(1u << (i % kLimbBits));
      }
      shifted >>= 1;
    }
    return {from_limbs(std::move(quotient)), std::move(remainder)};
  }

  friend BigUint operator/(const BigUint& a, const BigUint& b) { return divmod(a, b).first; }
  friend BigUint operator%(const BigUint& a, const BigUint& b) { return divmod(a, b).second; }

 private:
  static int hex_digit(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  void normalize() noexcept {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
  }

  std::vector<Limb> limbs_;
};

inline BigUint gcd(BigUint a, BigUint b) {
  while (!b.is_zero()) {
    BigUint r = a % b;
    a = std::move(b);
    b = std::move(r);
  }
  return a;
}

inline BigUint lcm(const BigUint& a, const BigUint& b) {
  if (a.is_zero() || b.is_zero()) return {};
  return (a / gcd(a, b)) * b;
}

/// Inverse of a modulo m (m >= 2). Throws when gcd(a, m) != 1.
inline BigUint mod_inverse(const BigUint& a, const BigUint& m) {
  if (m < BigUint{2}) throw ParameterError("modulus for inversion must be at least 2");
  // Extended Euclid with the Bezout coefficient kept reduced modulo m.
  BigUint r0 = m;
  BigUint r1 = a % m;
  BigUint t0{0};
  BigUint t1{1};
  while (!r1.is_zero()) {
    auto [q, r2] = BigUint::divmod(r0, r1);
    const BigUint qt = (q * t1) % m;
    BigUint t2 = (t0 + m - qt) % m;
    r0 = std::move(r1);
    r1 = std::move(r2);
    t0 = std::move(t1);
    t1 = std::move(t2);
  }
  if (r0 != BigUint{1}) throw ParameterError("value is not invertible modulo " + m.to_hex());
  return t0;
}

}  // namespace cipherloop
