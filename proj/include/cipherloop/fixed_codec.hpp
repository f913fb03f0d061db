#pragma once

// Two's-complement fixed-point numbers Q(n, m) and their embedding into the
// ring of integers modulo 2^n'.
//
// A value v in Q(n, m) is held as its integer numerator raw = v·2^m. An
// encoded integer at scale s is (v·2^(s·m)) mod 2^n'; scales are counted in
// units of m fractional bits.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "cipherloop/error.hpp"

namespace cipherloop {

/// Largest supported n'. Residues are stored in 64-bit words and products of
/// two residues must fit in 128 bits.
inline constexpr unsigned kMaxModulusBits = 62;

struct FixedSpec {
  unsigned n = 16;       ///< total bits
  unsigned m = 8;        ///< fractional bits
  unsigned n_prime = 32; ///< width of the residue ring

  void validate() const {
    if (n == 0 || m >= n) throw ConfigError("fixed-point format needs 0 <= m < n");
    if (n > 53) throw ConfigError("fixed-point width n above 53 bits is not supported");
    if (n_prime < n) {
      throw ConfigError("scale budget: n' = " + std::to_string(n_prime) + " cannot hold an " + std::to_string(n) +
                        "-bit value");
    }
    if (n_prime > kMaxModulusBits) {
      throw ConfigError("n' = " + std::to_string(n_prime) + " exceeds the supported maximum of " +
                        std::to_string(kMaxModulusBits));
    }
  }

  std::uint64_t modulus_mask() const noexcept { return (std::uint64_t{1} << n_prime) - 1; }
  std::int64_t raw_min() const noexcept { return -(std::int64_t{1} << (n - 1)); }
  std::int64_t raw_max() const noexcept { return (std::int64_t{1} << (n - 1)) - 1; }
  double resolution() const noexcept { return std::ldexp(1.0, -static_cast<int>(m)); }
  double min_value() const noexcept { return std::ldexp(static_cast<double>(raw_min()), -static_cast<int>(m)); }
  double max_value() const noexcept { return std::ldexp(static_cast<double>(raw_max()), -static_cast<int>(m)); }

  friend bool operator==(const FixedSpec&, const FixedSpec&) = default;
};

/// An element of Q(n, m): raw · 2^-frac_bits.
struct Fixed {
  std::int64_t raw = 0;
  unsigned frac_bits = 0;

  double value() const noexcept { return std::ldexp(static_cast<double>(raw), -static_cast<int>(frac_bits)); }
  friend bool operator==(const Fixed&, const Fixed&) = default;
};

/// Residue in Z_(2^n') together with the scale it was encoded at.
struct EncodedInt {
  std::uint64_t residue = 0;
  int scale = 0;
  friend bool operator==(const EncodedInt&, const EncodedInt&) = default;
};

/// Counts how many inputs the quantizer had to clamp.
class SaturationCounter {
 public:
  void record() noexcept { ++count_; }
  std::uint64_t count() const noexcept { return count_; }
  void reset() noexcept { count_ = 0; }

 private:
  std::uint64_t count_ = 0;
};

/// Nearest element of Q(n, frac_bits) with integer range fixed by (n, m).
/// Ties round away from zero; out-of-range inputs saturate.
///
/// frac_bits defaults to m. A smaller value quantizes onto a coarser grid
/// inside the same range, used for signals that are encoded as integers.
inline Fixed quantize(const FixedSpec& spec, double x, SaturationCounter* saturation = nullptr,
                      std::optional<unsigned> frac_bits = std::nullopt) {
  const unsigned f = frac_bits.value_or(spec.m);
  if (f > spec.m) throw ParameterError("quantizer grid finer than the format");
  if (std::isnan(x)) throw ParameterError("cannot quantize NaN");
  const int drop = static_cast<int>(spec.m - f);
  const std::int64_t lo = spec.raw_min() >> drop;
  const std::int64_t hi = spec.raw_max() >> drop;
  const double scaled = std::round(std::ldexp(x, static_cast<int>(f)));
  std::int64_t raw = 0;
  if (scaled < static_cast<double>(lo)) {
    raw = lo;
    if (saturation) saturation->record();
  } else if (scaled > static_cast<double>(hi)) {
    raw = hi;
    if (saturation) saturation->record();
  } else {
    raw = static_cast<std::int64_t>(scaled);
  }
  return {raw, f};
}

namespace detail {

inline bool fits_signed(__int128 v, unsigned bits) {
  const __int128 bound = static_cast<__int128>(1) << (bits - 1);
  return v >= -bound && v < bound;
}

inline std::uint64_t reduce(__int128 v, unsigned n_prime) {
  const __int128 modulus = static_cast<__int128>(1) << n_prime;
  __int128 r = v % modulus;
  if (r < 0) r += modulus;
  return static_cast<std::uint64_t>(r);
}

}  // namespace detail

/// Exact integer f·2^(scale·m), or nullopt when it is not an integer.
inline std::optional<__int128> scaled_integer(const FixedSpec& spec, const Fixed& f, int scale) {
  const long shift = static_cast<long>(scale) * spec.m - static_cast<long>(f.frac_bits);
  if (shift >= 0) {
    if (shift > 62) return std::nullopt;
    const __int128 v = static_cast<__int128>(f.raw) * (static_cast<__int128>(1) << shift);
    return v;
  }
  if (-shift >= 63) return f.raw == 0 ? std::optional<__int128>(0) : std::nullopt;
  const std::int64_t divisor = std::int64_t{1} << (-shift);
  if (f.raw % divisor != 0) return std::nullopt;
  return static_cast<__int128>(f.raw / divisor);
}

/// (f·2^(scale·m)) mod 2^n'. Throws when the scaled value is not an integer
/// or does not fit in n' signed bits.
inline EncodedInt encode(const FixedSpec& spec, const Fixed& f, int scale) {
  const auto v = scaled_integer(spec, f, scale);
  if (!v) {
    throw OverflowError("value " + std::to_string(f.value()) + " is not an integer at scale " + std::to_string(scale));
  }
  if (!detail::fits_signed(*v, spec.n_prime)) {
    throw OverflowError("value " + std::to_string(f.value()) + " at scale " + std::to_string(scale) +
                        " exceeds n' = " + std::to_string(spec.n_prime) + " bits");
  }
  return {detail::reduce(*v, spec.n_prime), scale};
}

/// Signed integer represented by a residue (two's complement in n' bits).
inline std::int64_t to_signed(const FixedSpec& spec, std::uint64_t residue) {
  residue &= spec.modulus_mask();
  const std::uint64_t half = std::uint64_t{1} << (spec.n_prime - 1);
  return residue >= half ? static_cast<std::int64_t>(residue) - (std::int64_t{1} << spec.n_prime)
                         : static_cast<std::int64_t>(residue);
}

/// 2^(-scale·m) · signed(residue).
inline double decode(const FixedSpec& spec, const EncodedInt& e) {
  return std::ldexp(static_cast<double>(to_signed(spec, e.residue)), -e.scale * static_cast<int>(spec.m));
}

/// Period between state resets; nullopt means the state is never reset.
struct ResetPeriod {
  std::optional<std::uint64_t> steps;

  static ResetPeriod finite(std::uint64_t t) { return {t}; }
  static ResetPeriod infinite() { return {std::nullopt}; }
  bool is_infinite() const noexcept { return !steps.has_value(); }
  /// Phase of step k within the reset cycle (always 0 without resets).
  std::uint64_t phase(std::uint64_t k) const noexcept { return steps ? k % *steps : 0; }
  /// Whether the state computed at step k is replaced by zero.
  bool resets_after(std::uint64_t k) const noexcept { return steps && (k + 1) % *steps == 0; }
  std::string to_string() const { return steps ? std::to_string(*steps) : std::string("inf"); }

  friend bool operator==(const ResetPeriod&, const ResetPeriod&) = default;
};

/// Ring width that rules out overflow for a controller reset every T steps:
/// (n_x + 1)T + n_u + n(T + 2). An explicit override takes precedence.
inline unsigned derive_n_prime(std::size_t n_x, std::size_t n_u, ResetPeriod period, unsigned n,
                               std::optional<unsigned> override_bits = std::nullopt) {
  if (override_bits) return *override_bits;
  if (period.is_infinite()) throw ConfigError("n' cannot be derived for T = inf; set it explicitly");
  const std::uint64_t t = *period.steps;
  if (t == 0) throw ConfigError("reset period must be at least 1");
  const std::uint64_t bits = (n_x + 1) * t + n_u + static_cast<std::uint64_t>(n) * (t + 2);
  if (bits > std::numeric_limits<unsigned>::max()) throw ConfigError("derived n' is out of range");
  return static_cast<unsigned>(bits);
}

}  // namespace cipherloop
