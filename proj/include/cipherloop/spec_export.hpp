#pragma once

// Text form of an encoded controller: what the controller service computes with.

#include <ostream>
#include <string>

#include "cipherloop/controller.hpp"

namespace cipherloop {

namespace detail {

inline void write_matrix(std::ostream& out, const std::string& name, const ResidueMatrix& m) {
  out << name << " =";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << (i == 0 ? " " : "; ");
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j == 0 ? "" : " ") << m(i, j);
  }
  out << '\n';
}

inline void write_scales(std::ostream& out, const std::string& name, const std::vector<int>& s) {
  out << name << " =";
  for (const int v : s) out << ' ' << v;
  out << '\n';
}

}  // namespace detail

/// "key = value" lines; matrices are row-major, rows separated by ';'.
inline void write_controller_spec(std::ostream& out, const ControllerSpec& spec) {
  out << "n = " << spec.codec.n << '\n'
      << "m = " << spec.codec.m << '\n'
      << "n_prime = " << spec.codec.n_prime << '\n'
      << "T = " << spec.period.to_string() << '\n'
      << "n_x = " << spec.n_x << '\n'
      << "n_y = " << spec.n_y << '\n'
      << "n_u = " << spec.n_u << '\n'
      << "signal_scale = " << spec.signal_scale << '\n';
  for (std::size_t p = 0; p < spec.phases(); ++p) {
    const std::string suffix = "[" + std::to_string(p) + "]";
    detail::write_scales(out, "state_scale" + suffix, spec.state_scale[p]);
    detail::write_scales(out, "output_scale" + suffix, spec.output_scale[p]);
    detail::write_matrix(out, "A_hat" + suffix, spec.a_hat[p]);
    detail::write_matrix(out, "B_hat" + suffix, spec.b_hat[p]);
    detail::write_matrix(out, "C_hat" + suffix, spec.c_hat[p]);
  }
  const PlaintextBound bound = plaintext_bound(spec);
  out << "plaintext_bits = " << bound.max_bits() << '\n' << "min_key_bits = " << bound.min_key_bits() << '\n';
}

}  // namespace cipherloop
