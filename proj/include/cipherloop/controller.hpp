#pragma once

// Resetting linear controller
//
//   x[k+1] = A x[k] + B (s[k] - y[k])   if (k+1) mod T > 0, else 0
//   u[k]   = C x[k]
//
// in three forms: real-valued, quantized to Q(n, m), and integer-encoded
// over Z_(2^n'). The integer form fixes a scale for every signal at every
// phase of the reset cycle; the encrypted controller evaluates exactly the
// same integer recursion on ciphertexts.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cipherloop/error.hpp"
#include "cipherloop/fixed_codec.hpp"
#include "cipherloop/matrix.hpp"

namespace cipherloop {

// ---------------------------------------------------------------------------
// Real-valued controller

struct RealController {
  RealMatrix a;  ///< n_x × n_x
  RealMatrix b;  ///< n_x × n_y
  RealMatrix c;  ///< n_u × n_x
  ResetPeriod period = ResetPeriod::infinite();

  std::size_t n_x() const noexcept { return a.rows(); }
  std::size_t n_y() const noexcept { return b.cols(); }
  std::size_t n_u() const noexcept { return c.rows(); }

  void check_shapes() const {
    require_shape(a.rows() == a.cols(), "A must be square");
    require_shape(b.rows() == a.rows(), "B rows must equal the state dimension");
    require_shape(c.cols() == a.rows(), "C columns must equal the state dimension");
    if (period.steps && *period.steps == 0) throw ConfigError("reset period must be at least 1");
  }
};

struct ReferenceStep {
  RealVector x_next;
  RealVector u;
};

inline ReferenceStep reference_step(const RealController& ctl, const RealVector& x, const RealVector& s,
                                    const RealVector& y, std::uint64_t k) {
  ctl.check_shapes();
  require_shape(x.size() == ctl.n_x(), "state vector");
  require_shape(s.size() == ctl.n_y() && y.size() == ctl.n_y(), "setpoint/measurement vectors");
  ReferenceStep out;
  out.u = multiply(ctl.c, x);
  if (ctl.period.resets_after(k)) {
    out.x_next.assign(ctl.n_x(), 0.0);
    return out;
  }
  RealVector e(s.size());
  for (std::size_t j = 0; j < e.size(); ++j) e[j] = s[j] - y[j];
  out.x_next = multiply(ctl.a, x);
  const RealVector be = multiply(ctl.b, e);
  for (std::size_t i = 0; i < out.x_next.size(); ++i) out.x_next[i] += be[i];
  return out;
}

// ---------------------------------------------------------------------------
// Quantized controller

struct QuantizedController {
  Matrix<Fixed> a;
  Matrix<Fixed> b;
  Matrix<Fixed> c;
  ResetPeriod period = ResetPeriod::infinite();
  FixedSpec codec;

  std::size_t n_x() const noexcept { return a.rows(); }
  std::size_t n_y() const noexcept { return b.cols(); }
  std::size_t n_u() const noexcept { return c.rows(); }

  /// Real-valued controller with the quantized entries.
  RealController as_real() const {
    const auto value = [](const Fixed& f) { return f.value(); };
    return {a.map(value), b.map(value), c.map(value), period};
  }
};

inline QuantizedController quantize_controller(const RealController& ctl, const FixedSpec& codec,
                                               SaturationCounter* saturation = nullptr) {
  ctl.check_shapes();
  codec.validate();
  const auto q = [&](double v) { return quantize(codec, v, saturation); };
  return {ctl.a.map(q), ctl.b.map(q), ctl.c.map(q), ctl.period, codec};
}

// ---------------------------------------------------------------------------
// Integer controller over Z_(2^n')

/// How state and output scales are assigned across the reset cycle.
enum class ScaleSchedule {
  /// One factor 2^m per step since the last reset; needs a finite T.
  uniform,
  /// Smallest scales that keep every encoded entry integral. Constant when T
  /// is infinite, which requires A's nonzero pattern to be acyclic.
  minimal,
};

using ResidueMatrix = Matrix<std::uint64_t>;
using ResidueVector = std::vector<std::uint64_t>;

/// Public integer controller: everything the controller service needs.
struct ControllerSpec {
  FixedSpec codec;
  ResetPeriod period = ResetPeriod::infinite();
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  std::size_t n_u = 0;
  /// Scale of encoded setpoints and measurements.
  int signal_scale = 1;
  /// state_scale[p][i]: scale of state i at phase p.
  std::vector<std::vector<int>> state_scale;
  /// output_scale[p][i]: scale of control output i computed at phase p.
  std::vector<std::vector<int>> output_scale;
  /// Encoded matrices per phase. At the last phase of a finite cycle the
  /// state is reset, so a_hat and b_hat there are zero.
  std::vector<ResidueMatrix> a_hat;
  std::vector<ResidueMatrix> b_hat;
  std::vector<ResidueMatrix> c_hat;

  std::size_t phases() const noexcept { return a_hat.size(); }
  std::size_t phase(std::uint64_t k) const noexcept { return static_cast<std::size_t>(period.phase(k)); }
  /// 2^n' - 1, the residue of -1.
  std::uint64_t minus_one() const noexcept { return codec.modulus_mask(); }
};

namespace detail {

/// Smallest e >= 0 with f·2^(e·m) integral.
inline int integer_scale_need(const Fixed& f, unsigned m) {
  if (f.raw == 0 || f.frac_bits == 0) return 0;
  const unsigned tz = static_cast<unsigned>(std::countr_zero(static_cast<std::uint64_t>(f.raw)));
  if (tz >= f.frac_bits) return 0;
  if (m == 0) throw ConfigError("fractional entry with m = 0");
  const unsigned deficit = f.frac_bits - tz;
  return static_cast<int>((deficit + m - 1) / m);
}

inline bool has_cycle(const Matrix<Fixed>& a) {
  // Kahn's algorithm on edges j -> i for every nonzero A(i, j).
  const std::size_t n = a.rows();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) indegree[i] += a(i, j).raw != 0 ? 1 : 0;
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::size_t j = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t i = 0; i < n; ++i) {
      if (a(i, j).raw != 0 && --indegree[i] == 0) ready.push_back(i);
    }
  }
  return visited != n;
}

struct Scales {
  std::vector<std::vector<int>> state;
  std::vector<std::vector<int>> output;
};

inline std::vector<int> output_scales_for(const QuantizedController& q, const std::vector<int>& state) {
  std::vector<int> out(q.n_u(), 0);
  for (std::size_t i = 0; i < q.n_u(); ++i) {
    for (std::size_t j = 0; j < q.n_x(); ++j) {
      if (q.c(i, j).raw != 0) out[i] = std::max(out[i], state[j] + integer_scale_need(q.c(i, j), q.codec.m));
    }
  }
  return out;
}

inline std::vector<int> next_state_scales(const QuantizedController& q, const std::vector<int>& state,
                                          int signal_scale) {
  const unsigned m = q.codec.m;
  std::vector<int> next(q.n_x(), 0);
  for (std::size_t i = 0; i < q.n_x(); ++i) {
    for (std::size_t j = 0; j < q.n_x(); ++j) {
      if (q.a(i, j).raw != 0) next[i] = std::max(next[i], state[j] + integer_scale_need(q.a(i, j), m));
    }
    for (std::size_t j = 0; j < q.n_y(); ++j) {
      if (q.b(i, j).raw != 0) next[i] = std::max(next[i], signal_scale + integer_scale_need(q.b(i, j), m));
    }
  }
  return next;
}

inline Scales plan_scales(const QuantizedController& q, int signal_scale, ScaleSchedule schedule) {
  Scales s;
  if (schedule == ScaleSchedule::uniform) {
    if (q.period.is_infinite()) throw ConfigError("the uniform scale schedule needs a finite reset period");
    for (std::uint64_t p = 0; p < *q.period.steps; ++p) {
      const int sx = signal_scale + static_cast<int>(p);
      s.state.emplace_back(q.n_x(), sx);
      s.output.emplace_back(q.n_u(), sx + 1);
    }
    return s;
  }
  if (q.period.is_infinite()) {
    // Longest-path fixpoint; converges within n_x passes on an acyclic pattern.
    std::vector<int> state(q.n_x(), 0);
    for (std::size_t pass = 0; pass <= q.n_x(); ++pass) state = next_state_scales(q, state, signal_scale);
    s.state.push_back(state);
    s.output.push_back(output_scales_for(q, state));
    return s;
  }
  std::vector<int> state(q.n_x(), 0);
  for (std::uint64_t p = 0; p < *q.period.steps; ++p) {
    s.state.push_back(state);
    s.output.push_back(output_scales_for(q, state));
    state = next_state_scales(q, state, signal_scale);
  }
  return s;
}

inline std::uint64_t encode_entry(const FixedSpec& codec, const Fixed& f, int scale, const char* name,
                                  std::size_t i, std::size_t j) {
  try {
    return encode(codec, f, scale).residue;
  } catch (const OverflowError& e) {
    throw ConfigError(std::string("cannot encode ") + name + "(" + std::to_string(i) + "," + std::to_string(j) +
                      "): " + e.what());
  }
}

}  // namespace detail

/// Maps a quantized controller onto Z_(2^n') with the given scale schedule.
/// Throws ConfigError when a scale exceeds the n' budget, when T is infinite
/// and A has a cycle, or when an entry cannot be encoded.
inline ControllerSpec make_controller_spec(const QuantizedController& q, int signal_scale,
                                           ScaleSchedule schedule = ScaleSchedule::uniform) {
  q.as_real().check_shapes();
  q.codec.validate();
  if (signal_scale < 0) throw ConfigError("signal scale must be non-negative");
  if (q.period.is_infinite() && detail::has_cycle(q.a)) {
    throw ConfigError("T = inf requires an acyclic A: state scale or plaintext size would grow without bound");
  }

  const detail::Scales scales = detail::plan_scales(q, signal_scale, schedule);
  const unsigned m = q.codec.m;
  const unsigned int_bits = q.codec.n - m;
  const auto check_budget = [&](int scale, const std::string& what) {
    if (static_cast<long>(scale) * m + int_bits > q.codec.n_prime) {
      throw ConfigError("scale budget exceeded: " + what + " at scale " + std::to_string(scale) + " needs " +
                        std::to_string(static_cast<long>(scale) * m + int_bits) + " bits, n' = " +
                        std::to_string(q.codec.n_prime));
    }
  };
  check_budget(signal_scale, "signals");
  for (const auto& phase : scales.state) {
    for (const int sc : phase) check_budget(sc, "state");
  }
  for (const auto& phase : scales.output) {
    for (const int sc : phase) check_budget(sc, "control output");
  }

  ControllerSpec spec;
  spec.codec = q.codec;
  spec.period = q.period;
  spec.n_x = q.n_x();
  spec.n_y = q.n_y();
  spec.n_u = q.n_u();
  spec.signal_scale = signal_scale;
  spec.state_scale = scales.state;
  spec.output_scale = scales.output;

  const std::size_t phases = scales.state.size();
  for (std::size_t p = 0; p < phases; ++p) {
    const auto& here = scales.state[p];
    ResidueMatrix a(spec.n_x, spec.n_x, 0);
    ResidueMatrix b(spec.n_x, spec.n_y, 0);
    ResidueMatrix c(spec.n_u, spec.n_x, 0);
    const bool resets = q.period.steps && p + 1 == phases;
    if (!resets) {
      const auto& next = scales.state[(p + 1) % phases];
      for (std::size_t i = 0; i < spec.n_x; ++i) {
        for (std::size_t j = 0; j < spec.n_x; ++j) a(i, j) = detail::encode_entry(q.codec, q.a(i, j), next[i] - here[j], "A", i, j);
        for (std::size_t j = 0; j < spec.n_y; ++j) b(i, j) = detail::encode_entry(q.codec, q.b(i, j), next[i] - signal_scale, "B", i, j);
      }
    }
    for (std::size_t i = 0; i < spec.n_u; ++i) {
      for (std::size_t j = 0; j < spec.n_x; ++j) {
        c(i, j) = detail::encode_entry(q.codec, q.c(i, j), scales.output[p][i] - here[j], "C", i, j);
      }
    }
    spec.a_hat.push_back(std::move(a));
    spec.b_hat.push_back(std::move(b));
    spec.c_hat.push_back(std::move(c));
  }
  return spec;
}

/// Fractional bits of the grid signals are quantized to before encoding.
inline unsigned signal_frac_bits(const ControllerSpec& spec) {
  return static_cast<unsigned>(std::min<long>(spec.codec.m, static_cast<long>(spec.signal_scale) * spec.codec.m));
}

inline Fixed quantize_signal(const ControllerSpec& spec, double v, SaturationCounter* saturation = nullptr) {
  return quantize(spec.codec, v, saturation, signal_frac_bits(spec));
}

/// Quantizes and encodes a setpoint or measurement vector at the signal scale.
inline ResidueVector encode_signals(const ControllerSpec& spec, std::span<const double> values,
                                    SaturationCounter* saturation = nullptr) {
  ResidueVector out;
  out.reserve(values.size());
  for (const double v : values) out.push_back(encode(spec.codec, quantize_signal(spec, v, saturation), spec.signal_scale).residue);
  return out;
}

/// Real control values of the residues produced at step k.
inline RealVector decode_outputs(const ControllerSpec& spec, std::span<const std::uint64_t> u_hat, std::uint64_t k) {
  require_shape(u_hat.size() == spec.n_u, "control vector");
  const auto& scales = spec.output_scale[spec.phase(k)];
  RealVector out(u_hat.size());
  for (std::size_t i = 0; i < u_hat.size(); ++i) out[i] = decode(spec.codec, {u_hat[i], scales[i]});
  return out;
}

/// Decoded real state at step k.
inline RealVector decode_state(const ControllerSpec& spec, std::span<const std::uint64_t> x_hat, std::uint64_t k) {
  require_shape(x_hat.size() == spec.n_x, "state vector");
  const auto& scales = spec.state_scale[spec.phase(k)];
  RealVector out(x_hat.size());
  for (std::size_t i = 0; i < x_hat.size(); ++i) out[i] = decode(spec.codec, {x_hat[i], scales[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Plaintext-size bound for the encrypted evaluation

/// Upper bounds (in bits) on the integers the encrypted controller carries
/// before any reduction modulo 2^n'. Decryption recovers them exactly only
/// while they stay below N.
struct PlaintextBound {
  std::size_t error_bits = 0;
  std::size_t state_bits = 0;
  std::size_t output_bits = 0;

  std::size_t max_bits() const noexcept { return std::max({error_bits, state_bits, output_bits}); }
  /// Smallest modulus bit length that cannot be reached by any carried plaintext.
  std::size_t min_key_bits() const noexcept { return max_bits() + 1; }
};

namespace detail {

inline std::size_t ceil_log2(std::size_t v) {
  std::size_t r = 0;
  while ((std::size_t{1} << r) < v) ++r;
  return r;
}

/// Bits of Σ_j M(i, j)·v_j for bit bounds v_j.
inline std::vector<std::size_t> product_bits(const ResidueMatrix& mat, const std::vector<std::size_t>& v) {
  std::vector<std::size_t> out(mat.rows(), 0);
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    std::size_t widest = 0;
    std::size_t terms = 0;
    for (std::size_t j = 0; j < mat.cols(); ++j) {
      if (mat(i, j) == 0 || v[j] == 0) continue;
      widest = std::max<std::size_t>(widest, v[j] + std::bit_width(mat(i, j)));
      ++terms;
    }
    out[i] = terms == 0 ? 0 : widest + ceil_log2(terms);
  }
  return out;
}

inline std::vector<std::size_t> sum_bits(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0 || b[i] == 0) {
      out[i] = std::max(a[i], b[i]);
    } else {
      out[i] = std::max(a[i], b[i]) + 1;
    }
  }
  return out;
}

}  // namespace detail

inline PlaintextBound plaintext_bound(const ControllerSpec& spec) {
  PlaintextBound bound;
  // (2^n' - 1)·y + s with y, s < 2^n'.
  bound.error_bits = 2 * static_cast<std::size_t>(spec.codec.n_prime);
  const std::vector<std::size_t> error(spec.n_y, bound.error_bits);
  std::vector<std::size_t> state(spec.n_x, 0);

  const auto observe = [&](std::size_t p, const std::vector<std::size_t>& x) {
    for (const auto b : x) bound.state_bits = std::max(bound.state_bits, b);
    for (const auto b : detail::product_bits(spec.c_hat[p], x)) bound.output_bits = std::max(bound.output_bits, b);
  };
  const auto advance = [&](std::size_t p, const std::vector<std::size_t>& x) {
    return detail::sum_bits(detail::product_bits(spec.a_hat[p], x), detail::product_bits(spec.b_hat[p], error));
  };

  if (spec.period.is_infinite()) {
    // Monotone in the iteration; stabilizes within n_x + 1 passes for acyclic A.
    for (std::size_t pass = 0; pass <= spec.n_x + 1; ++pass) {
      observe(0, state);
      state = advance(0, state);
    }
    const auto again = advance(0, state);
    if (again != state) throw ConfigError("plaintext size grows without bound with T = inf");
    observe(0, state);
    return bound;
  }
  for (std::size_t p = 0; p < spec.phases(); ++p) {
    observe(p, state);
    if (p + 1 < spec.phases()) state = advance(p, state);
  }
  return bound;
}

/// Rejects a controller whose encrypted evaluation could wrap modulo N.
inline void validate_for_key(const ControllerSpec& spec, std::size_t key_bits) {
  const PlaintextBound bound = plaintext_bound(spec);
  if (bound.max_bits() + 1 > key_bits) {
    throw ConfigError("plaintexts may reach " + std::to_string(bound.max_bits()) + " bits, which needs keys of at least " +
                      std::to_string(bound.min_key_bits()) + " bits (have " + std::to_string(key_bits) + ")");
  }
}

// ---------------------------------------------------------------------------
// Exact integer recursion (the oracle for the encrypted controller)

struct PlainIntState {
  ResidueVector x;
  std::uint64_t k = 0;
  friend bool operator==(const PlainIntState&, const PlainIntState&) = default;
};

inline PlainIntState initial_int_state(const ControllerSpec& spec) { return {ResidueVector(spec.n_x, 0), 0}; }

namespace detail {

/// Σ M(i, j)·v_j mod 2^n', and whether the signed value left the n'-bit range.
inline ResidueVector residue_product(const FixedSpec& codec, const ResidueMatrix& mat, std::span<const std::uint64_t> v,
                                     bool& overflow) {
  ResidueVector out(mat.rows(), 0);
  const std::uint64_t mask = codec.modulus_mask();
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    unsigned __int128 acc = 0;
    __int128 exact = 0;
    for (std::size_t j = 0; j < mat.cols(); ++j) {
      acc += static_cast<unsigned __int128>(mat(i, j)) * v[j];
      acc &= mask;
      const __int128 term = static_cast<__int128>(to_signed(codec, mat(i, j))) * to_signed(codec, v[j]);
      if (__builtin_add_overflow(exact, term, &exact)) overflow = true;
    }
    out[i] = static_cast<std::uint64_t>(acc);
    if (!fits_signed(exact, codec.n_prime)) overflow = true;
  }
  return out;
}

}  // namespace detail

/// ě = ŝ - ŷ mod 2^n'.
inline ResidueVector int_error(const ControllerSpec& spec, std::span<const std::uint64_t> s_hat,
                               std::span<const std::uint64_t> y_hat) {
  require_shape(s_hat.size() == spec.n_y && y_hat.size() == spec.n_y, "signal vectors");
  ResidueVector e(spec.n_y);
  for (std::size_t j = 0; j < spec.n_y; ++j) e[j] = (s_hat[j] - y_hat[j]) & spec.codec.modulus_mask();
  return e;
}

struct IntControl {
  ResidueVector u;
  bool overflow = false;
};

inline IntControl int_generate_control(const ControllerSpec& spec, const PlainIntState& st) {
  require_shape(st.x.size() == spec.n_x, "state vector");
  IntControl out;
  out.u = detail::residue_product(spec.codec, spec.c_hat[spec.phase(st.k)], st.x, out.overflow);
  return out;
}

struct IntUpdate {
  PlainIntState next;
  bool overflow = false;
};

inline IntUpdate int_update_state(const ControllerSpec& spec, const PlainIntState& st, std::span<const std::uint64_t> s_hat,
                                  std::span<const std::uint64_t> y_hat) {
  require_shape(st.x.size() == spec.n_x, "state vector");
  IntUpdate out;
  out.next.k = st.k + 1;
  if (spec.period.resets_after(st.k)) {
    out.next.x.assign(spec.n_x, 0);
    return out;
  }
  const std::size_t p = spec.phase(st.k);
  const ResidueVector e = int_error(spec, s_hat, y_hat);
  // Overflow of the signed error itself is legal (it is exact mod 2^n');
  // only products and sums are checked.
  ResidueVector ax = detail::residue_product(spec.codec, spec.a_hat[p], st.x, out.overflow);
  const ResidueVector be = detail::residue_product(spec.codec, spec.b_hat[p], e, out.overflow);
  for (std::size_t i = 0; i < spec.n_x; ++i) {
    const __int128 exact = static_cast<__int128>(to_signed(spec.codec, ax[i])) + to_signed(spec.codec, be[i]);
    if (!detail::fits_signed(exact, spec.codec.n_prime)) out.overflow = true;
    ax[i] = (ax[i] + be[i]) & spec.codec.modulus_mask();
  }
  out.next.x = std::move(ax);
  return out;
}

struct IntStep {
  PlainIntState next;
  ResidueVector u;
  bool overflow = false;
};

/// One controller step: û from the current state, then the state update.
inline IntStep int_reference_step(const ControllerSpec& spec, const PlainIntState& st, std::span<const std::uint64_t> s_hat,
                                  std::span<const std::uint64_t> y_hat) {
  IntControl control = int_generate_control(spec, st);
  IntUpdate update = int_update_state(spec, st, s_hat, y_hat);
  return {std::move(update.next), std::move(control.u), control.overflow || update.overflow};
}

}  // namespace cipherloop
