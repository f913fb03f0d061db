#pragma once

// Plant interface (the trusted endpoint holding the private key) and the two
// loop drivers: in-process, and networked against a controller service.
//
// The plant interface runs the plaintext integer controller in lockstep on
// the same encoded signals, so every run checks the encrypted loop against
// it step by step.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cipherloop/closed_loop_types.hpp"
#include "cipherloop/controller.hpp"
#include "cipherloop/controller_service.hpp"
#include "cipherloop/enc_controller.hpp"
#include "cipherloop/entropy.hpp"
#include "cipherloop/log.hpp"
#include "cipherloop/loop_config.hpp"
#include "cipherloop/net.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/paillier_private.hpp"
#include "cipherloop/plant_codec.hpp"
#include "cipherloop/plant_sim.hpp"
#include "cipherloop/presets.hpp"
#include "cipherloop/wire.hpp"

namespace cipherloop {

namespace detail {

using Clock = std::chrono::steady_clock;

inline double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

}  // namespace detail

struct LoopOptions {
  std::uint64_t steps = 1000;
  std::uint64_t seed = 1;
  wire::SetpointMode setpoint_mode = wire::SetpointMode::randomized;
  RandomizerMode randomizer = RandomizerMode::overlap;
  AccumulationOrder order = AccumulationOrder::tree;
  /// Networked only: how long to wait for a ControlBatch before holding the last input.
  std::chrono::milliseconds control_timeout{5000};
  /// Networked only: sleep out the remainder of each sample period.
  bool realtime = false;
};

/// Signals of one step as sampled, encoded and encrypted by the plant interface.
struct PlantSample {
  std::uint64_t k = 0;
  RealVector y;
  ResidueVector s_hat;
  ResidueVector y_hat;
  CipherVector s;  ///< empty when setpoints are encrypted at the controller
  CipherVector y_enc;
  double encrypt_us = 0;
};

class PlantInterface {
 public:
  PlantInterface(Preset preset, ControllerSpec spec, paillier::KeyPair keys, const LoopOptions& options)
      : preset_(std::move(preset)),
        spec_(std::move(spec)),
        keys_(std::move(keys)),
        rng_(options.seed),
        setpoint_mode_(options.setpoint_mode),
        randomizer_(options.randomizer),
        x_(preset_.plant_x0),
        last_u_(spec_.n_u, 0.0),
        reference_(initial_int_state(spec_)),
        key_covers_bound_(plaintext_bound(spec_).max_bits() + 1 <= keys_.pub.key_bits()) {
    preset_.plant.check();
    require_shape(x_.size() == preset_.plant.n_states(), "plant initial state");
    require_shape(preset_.plant.n_outputs() == spec_.n_y, "plant outputs must match controller inputs");
    require_shape(preset_.plant.n_inputs() == spec_.n_u, "plant inputs must match controller outputs");
  }

  const ControllerSpec& spec() const noexcept { return spec_; }
  const paillier::PublicKey& public_key() const noexcept { return keys_.pub; }
  const Preset& preset() const noexcept { return preset_; }
  std::uint64_t step() const noexcept { return k_; }
  const LoopSummary& summary() const noexcept { return summary_; }
  RandomizerMode randomizer_mode() const noexcept { return randomizer_; }
  wire::SetpointMode setpoint_mode() const noexcept { return setpoint_mode_; }

  /// Randomizers needed per step.
  std::size_t randomizers_per_step() const noexcept {
    return spec_.n_y * (setpoint_mode_ == wire::SetpointMode::randomized ? 2 : 1);
  }

  /// Computes the randomizers for the next sample; returns the time taken.
  double precompute_randomizers() {
    const auto start = detail::Clock::now();
    pool_.clear();
    for (std::size_t i = 0; i < randomizers_per_step(); ++i) pool_.push_back(paillier::sample_randomizer(keys_.pub, rng_));
    return detail::micros_since(start);
  }

  /// Samples, encodes and encrypts the outputs (and setpoints) of the current step.
  PlantSample sense() {
    PlantSample out;
    out.k = k_;
    out.y = plant_output(preset_.plant, x_, k_, &preset_.disturbance);
    const auto start = detail::Clock::now();
    out.y_hat = encode_signals(spec_, out.y, &saturation_);
    out.s_hat = encode_signals(spec_, preset_.setpoint.at(k_), &saturation_);
    if (randomizer_ == RandomizerMode::inline_ || pool_.size() < randomizers_per_step()) precompute_randomizers();
    out.y_enc = encrypt_residues(keys_.pub, out.y_hat, std::span(pool_).first(spec_.n_y));
    if (setpoint_mode_ == wire::SetpointMode::randomized) {
      out.s = encrypt_residues(keys_.pub, out.s_hat, std::span(pool_).subspan(spec_.n_y, spec_.n_y));
    }
    pool_.clear();
    out.encrypt_us = detail::micros_since(start);
    return out;
  }

  /// Decrypts the control (or holds the last input when it is missing),
  /// advances the plant, and checks the result against the integer controller.
  StepRecord actuate(const PlantSample& sample, const std::optional<CipherVector>& u, StepTiming timing) {
    if (sample.k != k_) throw ParameterError("actuating a sample from another step");
    StepRecord rec;
    rec.k = k_;
    rec.time_s = static_cast<double>(k_) * preset_.plant.dt;
    rec.y = sample.y;

    const IntStep ref = int_reference_step(spec_, reference_, sample.s_hat, sample.y_hat);
    if (ref.overflow) ++summary_.overflow_steps;
    rec.u_reference = decode_outputs(spec_, ref.u, k_);

    if (u) {
      const auto start = detail::Clock::now();
      const ResidueVector residues = decrypt_residues(spec_.codec, keys_, *u);
      rec.u_control = decode_outputs(spec_, residues, k_);
      rec.u_applied = preset_.actuator.apply(rec.u_control);
      timing.decrypt_us = detail::micros_since(start);
      rec.matched = residues == ref.u;
      if (rec.matched) {
        ++summary_.exact;
      } else {
        ++summary_.mismatched;
        // Expected when timing with a key below the no-wrap bound.
        if (key_covers_bound_) {
          log().error("step {}: decrypted control differs from the integer controller", k_);
        } else {
          log().debug("step {}: decrypted control wrapped modulo N", k_);
        }
      }
      last_u_ = rec.u_applied;
    } else {
      rec.held = true;
      rec.u_control = last_u_;
      rec.u_applied = last_u_;
      ++summary_.held;
      log().warn("step {}: no control received, holding the last input", k_);
    }
    timing.encrypt_us = sample.encrypt_us;
    timing.total_us = timing.encrypt_us + timing.network_out_us + timing.control_us + timing.network_back_us +
                      timing.round_trip_us + timing.decrypt_us;
    rec.timing = timing;
    rec.deadline_missed = timing.total_us > static_cast<double>(preset_.sample_period_us);
    if (rec.deadline_missed) ++summary_.deadline_misses;

    x_ = plant_step(preset_.plant, x_, rec.u_applied, k_, &preset_.disturbance).x_next;
    reference_ = ref.next;
    ++k_;
    ++summary_.steps;
    summary_.saturations = saturation_.count();
    return rec;
  }

 private:
  Preset preset_;
  ControllerSpec spec_;
  paillier::KeyPair keys_;
  SeededEntropy rng_;
  wire::SetpointMode setpoint_mode_;
  RandomizerMode randomizer_;
  std::vector<paillier::RandomizerPower> pool_;
  RealVector x_;
  RealVector last_u_;
  PlainIntState reference_;
  bool key_covers_bound_;
  SaturationCounter saturation_;
  std::uint64_t k_ = 0;
  LoopSummary summary_;
};

/// Both endpoints in one thread. Ciphertexts still pass through the wire
/// encoding; the network parts of the timing are that encode/decode time.
inline LoopResult run_in_process(const Preset& preset, const ControllerSpec& spec, const paillier::KeyPair& keys,
                                 const LoopOptions& options) {
  PlantInterface plant(preset, spec, keys, options);
  ControllerCore core(spec, keys.pub, options.order);
  std::optional<DeterministicSetpoints> fixed;
  if (options.setpoint_mode == wire::SetpointMode::deterministic) fixed.emplace(core.spec(), core.public_key(), preset.setpoint);
  const auto& pk = core.public_key();

  LoopResult result;
  result.records.reserve(options.steps);
  double pending_randomizer_us = 0;
  if (options.randomizer == RandomizerMode::overlap && options.steps > 0) pending_randomizer_us = plant.precompute_randomizers();
  for (std::uint64_t k = 0; k < options.steps; ++k) {
    StepTiming timing;
    timing.randomizer_us = options.randomizer == RandomizerMode::overlap ? pending_randomizer_us : 0.0;
    const PlantSample sample = plant.sense();

    auto start = detail::Clock::now();
    const CipherVector y = wire::batch_ciphertexts(
        wire::decode_frame(wire::encode_frame(wire::batch_frame(wire::MessageType::measurement, k, pk, sample.y_enc))), pk,
        spec.n_y);
    timing.network_out_us = detail::micros_since(start);
    CipherVector s = fixed ? fixed->at(k)
                           : wire::batch_ciphertexts(wire::decode_frame(wire::encode_frame(
                                                         wire::batch_frame(wire::MessageType::setpoint, k, pk, sample.s))),
                                                     pk, spec.n_y);

    start = detail::Clock::now();
    const CipherVector u = core.generate_control();
    timing.control_us = detail::micros_since(start);

    start = detail::Clock::now();
    CipherVector u_rx = wire::batch_ciphertexts(
        wire::decode_frame(wire::encode_frame(wire::batch_frame(wire::MessageType::control, k, pk, u))), pk, spec.n_u);
    timing.network_back_us = detail::micros_since(start);

    start = detail::Clock::now();
    core.update_state(s, y);
    timing.update_us = detail::micros_since(start);

    if (options.randomizer == RandomizerMode::overlap && k + 1 < options.steps) {
      pending_randomizer_us = plant.precompute_randomizers();
    }
    result.records.push_back(plant.actuate(sample, std::move(u_rx), timing));
  }
  result.summary = plant.summary();
  return result;
}

/// Plant side of a networked session: handshake, the sample/actuate loop,
/// then Shutdown. Throws ProtocolError when the controller refuses the session.
inline LoopResult run_plant_session(net::Channel& channel, PlantInterface& plant, const LoopOptions& options) {
  const auto& spec = plant.spec();
  const auto& pk = plant.public_key();
  const wire::SessionParams local =
      wire::session_params(spec, pk, plant.preset().sample_period_us, plant.setpoint_mode());
  channel.send(wire::hello_frame(local));
  const auto reply = channel.receive(options.control_timeout);
  if (!reply) throw ProtocolError("controller did not answer Hello");
  if (reply->type == wire::MessageType::shutdown) throw ProtocolError("session refused: " + wire::shutdown_reason(*reply));
  if (const auto field = wire::first_mismatch(local, wire::parse_hello(*reply))) {
    channel.send(wire::shutdown_frame(0, "session parameters differ in " + *field));
    throw ProtocolError("session refused: session parameters differ in " + *field);
  }

  const bool overlap = options.randomizer == RandomizerMode::overlap;
  const auto period = std::chrono::microseconds(plant.preset().sample_period_us);
  LoopResult result;
  result.records.reserve(options.steps);
  double pending_randomizer_us = 0;
  if (overlap && options.steps > 0) pending_randomizer_us = plant.precompute_randomizers();
  auto tick = detail::Clock::now();
  for (std::uint64_t k = 0; k < options.steps; ++k) {
    StepTiming timing;
    timing.randomizer_us = pending_randomizer_us;
    const PlantSample sample = plant.sense();

    const auto sent = detail::Clock::now();
    if (plant.setpoint_mode() == wire::SetpointMode::randomized) {
      channel.send(wire::batch_frame(wire::MessageType::setpoint, k, pk, sample.s));
    }
    channel.send(wire::batch_frame(wire::MessageType::measurement, k, pk, sample.y_enc));

    // Randomizers for the next sample are computed while the controller works.
    std::jthread worker;
    if (overlap && k + 1 < options.steps) worker = std::jthread([&] { pending_randomizer_us = plant.precompute_randomizers(); });

    std::optional<CipherVector> u;
    const auto deadline = sent + options.control_timeout;
    while (!u) {
      const auto now = detail::Clock::now();
      if (now >= deadline) break;
      const auto frame = channel.receive(std::chrono::duration_cast<std::chrono::microseconds>(deadline - now));
      if (!frame) break;
      if (frame->type == wire::MessageType::shutdown) {
        throw ProtocolError("controller ended the session: " + wire::shutdown_reason(*frame));
      }
      if (frame->type != wire::MessageType::control) {
        throw ProtocolError("unexpected " + std::string(wire::to_string(frame->type)) + " at the plant");
      }
      if (frame->seq < k) {
        log().warn("plant: discarding stale ControlBatch {} at step {}", frame->seq, k);
        ++result.stale_frames;
        continue;
      }
      if (frame->seq > k) throw ProtocolError("ControlBatch " + std::to_string(frame->seq) + " is ahead of step " + std::to_string(k));
      u = wire::batch_ciphertexts(*frame, pk, spec.n_u);
    }
    timing.round_trip_us = detail::micros_since(sent);
    if (worker.joinable()) worker.join();
    result.records.push_back(plant.actuate(sample, u, timing));

    if (options.realtime) {
      tick += period;
      std::this_thread::sleep_until(tick);
    }
  }
  channel.send(wire::shutdown_frame(options.steps));
  result.summary = plant.summary();
  return result;
}

/// Writes the trajectory. The rotary-pendulum preset uses the columns
/// step,time_s,theta_counts,alpha_counts,u_duty; other presets list every
/// output and input as y<i>, u<i>. Networked runs append per-step latencies.
inline void write_trajectory_csv(std::ostream& out, const Preset& preset, const std::vector<StepRecord>& records,
                                 bool networked) {
  const bool qube = preset.name == "qube";
  const std::size_t n_y = preset.plant.n_outputs(), n_u = preset.plant.n_inputs();
  out << "step,time_s";
  if (qube) {
    out << ",theta_counts,alpha_counts,u_duty";
  } else {
    for (std::size_t i = 0; i < n_y; ++i) out << ",y" << i;
    for (std::size_t i = 0; i < n_u; ++i) out << ",u" << i;
  }
  if (networked) out << ",encrypt_us,round_trip_us,decrypt_us,total_us,deadline_missed,held_input";
  out << '\n';
  out.precision(10);
  for (const auto& r : records) {
    out << r.k << ',' << r.time_s;
    if (qube) {
      out << ',' << r.y[0] << ',' << r.y[2] << ',' << r.u_applied[0];
    } else {
      for (const double v : r.y) out << ',' << v;
      for (const double v : r.u_applied) out << ',' << v;
    }
    if (networked) {
      out << ',' << r.timing.encrypt_us << ',' << r.timing.round_trip_us << ',' << r.timing.decrypt_us << ','
          << r.timing.total_us << ',' << (r.deadline_missed ? 1 : 0) << ',' << (r.held ? 1 : 0);
    }
    out << '\n';
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Preset& preset,
                                 const std::vector<StepRecord>& records, bool networked) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_trajectory_csv(out, preset, records, networked);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cipherloop
