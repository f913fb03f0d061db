#pragma once

// Plant-interface side of the encrypted loop: turns real signals into
// ciphertexts and decrypted control residues back into real values.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cipherloop/controller.hpp"
#include "cipherloop/enc_controller.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/paillier_private.hpp"

namespace cipherloop {

/// Encrypts residues, consuming one precomputed randomizer per entry.
inline CipherVector encrypt_residues(const paillier::PublicKey& pk, std::span<const std::uint64_t> residues,
                                     std::span<const paillier::RandomizerPower> randomizers) {
  require_shape(randomizers.size() >= residues.size(), "not enough randomizers");
  CipherVector out;
  out.reserve(residues.size());
  for (std::size_t i = 0; i < residues.size(); ++i) out.push_back(paillier::encrypt(pk, BigUint{residues[i]}, randomizers[i]));
  return out;
}

inline CipherVector encrypt_residues(const paillier::PublicKey& pk, std::span<const std::uint64_t> residues, EntropySource& rng,
                                     ExpSchedule schedule = ExpSchedule::sequential) {
  CipherVector out;
  out.reserve(residues.size());
  for (const auto r : residues) out.push_back(paillier::encrypt(pk, BigUint{r}, paillier::sample_randomizer(pk, rng, schedule)));
  return out;
}

/// Encryption with r = 1, for setpoints that need no randomization.
inline CipherVector encrypt_residues_deterministic(const paillier::PublicKey& pk, std::span<const std::uint64_t> residues) {
  CipherVector out;
  out.reserve(residues.size());
  for (const auto r : residues) out.push_back(paillier::encrypt_deterministic(pk, BigUint{r}));
  return out;
}

/// Decrypts and reduces modulo 2^n'.
inline ResidueVector decrypt_residues(const FixedSpec& codec, const paillier::KeyPair& keys, std::span<const paillier::Ciphertext> c,
                                      ExpSchedule schedule = ExpSchedule::sequential) {
  ResidueVector out;
  out.reserve(c.size());
  const BigUint modulus = BigUint::power_of_two(codec.n_prime);
  for (const auto& ct : c) out.push_back((paillier::decrypt(keys.priv, keys.pub, ct, schedule) % modulus).to_u64());
  return out;
}

/// Real control vector produced at step k.
inline RealVector decode_control(const ControllerSpec& spec, const paillier::KeyPair& keys, std::span<const paillier::Ciphertext> u,
                                 std::uint64_t k, ExpSchedule schedule = ExpSchedule::sequential) {
  const ResidueVector residues = decrypt_residues(spec.codec, keys, u, schedule);
  return decode_outputs(spec, residues, k);
}

}  // namespace cipherloop
