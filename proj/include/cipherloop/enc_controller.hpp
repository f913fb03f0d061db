#pragma once

// Controller evaluated on Paillier ciphertexts. Needs only the public key:
// this header must never pull in private-key material.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cipherloop/controller.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/paillier.hpp"

namespace cipherloop {

using CipherVector = std::vector<paillier::Ciphertext>;

enum class AccumulationOrder {
  tree,        ///< pairwise, depth ceil(log2(terms))
  sequential,  ///< left to right
};

struct EncState {
  CipherVector x;
  std::uint64_t k = 0;
  friend bool operator==(const EncState&, const EncState&) = default;
};

/// Zero state: every component is R mod N², the unit encryption of 0.
inline EncState initial_enc_state(const ControllerSpec& spec, const paillier::PublicKey& pk) {
  return {CipherVector(spec.n_x, paillier::encrypt_zero_unit(pk)), 0};
}

namespace detail {

inline paillier::Ciphertext accumulate(const paillier::PublicKey& pk, std::vector<paillier::Ciphertext> terms,
                                       AccumulationOrder order) {
  if (terms.empty()) return paillier::encrypt_zero_unit(pk);
  if (order == AccumulationOrder::sequential) {
    paillier::Ciphertext acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = paillier::hom_add(pk, acc, terms[i]);
    return acc;
  }
  while (terms.size() > 1) {
    std::vector<paillier::Ciphertext> next;
    next.reserve((terms.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < terms.size(); i += 2) next.push_back(paillier::hom_add(pk, terms[i], terms[i + 1]));
    if (terms.size() % 2 == 1) next.push_back(terms.back());
    terms = std::move(next);
  }
  return terms.front();
}

/// Row i of M ⊗ v. Every entry is applied, zeros included, so the work does
/// not depend on the matrix values.
inline std::vector<paillier::Ciphertext> scaled_row(const ControllerSpec& spec, const paillier::PublicKey& pk,
                                                   const ResidueMatrix& mat, std::size_t i, std::span<const paillier::Ciphertext> v,
                                                   ExpSchedule schedule) {
  std::vector<paillier::Ciphertext> terms;
  terms.reserve(mat.cols());
  for (std::size_t j = 0; j < mat.cols(); ++j) {
    terms.push_back(paillier::hom_scale(pk, BigUint{mat(i, j)}, v[j], spec.codec.n_prime, schedule));
  }
  return terms;
}

}  // namespace detail

/// ě_j = (2^n' - 1) ⊗ ỹ_j ⊕ s̃_j, which decrypts to ŝ_j - ŷ_j modulo 2^n'.
inline CipherVector encrypted_error(const ControllerSpec& spec, const paillier::PublicKey& pk, std::span<const paillier::Ciphertext> s,
                                    std::span<const paillier::Ciphertext> y, ExpSchedule schedule = ExpSchedule::sequential) {
  require_shape(s.size() == spec.n_y && y.size() == spec.n_y, "encrypted signal vectors");
  CipherVector e;
  e.reserve(spec.n_y);
  const BigUint minus_one{spec.minus_one()};
  for (std::size_t j = 0; j < spec.n_y; ++j) {
    e.push_back(paillier::hom_add(pk, paillier::hom_scale(pk, minus_one, y[j], spec.codec.n_prime, schedule), s[j]));
  }
  return e;
}

/// ũ_i = ⊕_j Ĉ_ij ⊗ x̃_j.
inline CipherVector encrypted_generate_control(const ControllerSpec& spec, const paillier::PublicKey& pk, const EncState& st,
                                               AccumulationOrder order = AccumulationOrder::tree,
                                               ExpSchedule schedule = ExpSchedule::sequential) {
  require_shape(st.x.size() == spec.n_x, "encrypted state");
  const ResidueMatrix& c = spec.c_hat[spec.phase(st.k)];
  CipherVector u;
  u.reserve(spec.n_u);
  for (std::size_t i = 0; i < spec.n_u; ++i) {
    u.push_back(detail::accumulate(pk, detail::scaled_row(spec, pk, c, i, st.x, schedule), order));
  }
  return u;
}

/// Next encrypted state; the reset value at the end of each cycle.
inline EncState encrypted_update_state(const ControllerSpec& spec, const paillier::PublicKey& pk, const EncState& st,
                                       std::span<const paillier::Ciphertext> s, std::span<const paillier::Ciphertext> y,
                                       AccumulationOrder order = AccumulationOrder::tree,
                                       ExpSchedule schedule = ExpSchedule::sequential) {
  require_shape(st.x.size() == spec.n_x, "encrypted state");
  if (spec.period.resets_after(st.k)) return {CipherVector(spec.n_x, paillier::encrypt_zero_unit(pk)), st.k + 1};
  const std::size_t p = spec.phase(st.k);
  const CipherVector e = encrypted_error(spec, pk, s, y, schedule);
  EncState next;
  next.k = st.k + 1;
  next.x.reserve(spec.n_x);
  for (std::size_t i = 0; i < spec.n_x; ++i) {
    auto terms = detail::scaled_row(spec, pk, spec.a_hat[p], i, st.x, schedule);
    auto from_error = detail::scaled_row(spec, pk, spec.b_hat[p], i, e, schedule);
    terms.insert(terms.end(), from_error.begin(), from_error.end());
    next.x.push_back(detail::accumulate(pk, std::move(terms), order));
  }
  return next;
}

}  // namespace cipherloop
