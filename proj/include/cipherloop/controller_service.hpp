#pragma once

// Controller endpoint: evaluates the control law on ciphertexts it receives
// from the plant interface. Holds the public key only.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "cipherloop/controller.hpp"
#include "cipherloop/enc_controller.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/log.hpp"
#include "cipherloop/net.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/presets.hpp"
#include "cipherloop/wire.hpp"

namespace cipherloop {

/// Encrypted controller state plus the step counter, independent of transport.
class ControllerCore {
 public:
  ControllerCore(ControllerSpec spec, paillier::PublicKey pk, AccumulationOrder order = AccumulationOrder::tree)
      : spec_(std::move(spec)), pk_(std::move(pk)), order_(order), state_(initial_enc_state(spec_, pk_)) {}

  const ControllerSpec& spec() const noexcept { return spec_; }
  const paillier::PublicKey& public_key() const noexcept { return pk_; }
  std::uint64_t step() const noexcept { return state_.k; }
  const EncState& state() const noexcept { return state_; }

  /// ũ[k] from the current state.
  CipherVector generate_control() const { return encrypted_generate_control(spec_, pk_, state_, order_); }

  /// Advances to k + 1 with the encrypted setpoint and measurement of step k.
  void update_state(std::span<const paillier::Ciphertext> s, std::span<const paillier::Ciphertext> y) {
    state_ = encrypted_update_state(spec_, pk_, state_, s, y, order_);
  }

 private:
  ControllerSpec spec_;
  paillier::PublicKey pk_;
  AccumulationOrder order_;
  EncState state_;
};

/// Setpoints encrypted at the controller with r = 1, cached per distinct value.
class DeterministicSetpoints {
 public:
  DeterministicSetpoints(const ControllerSpec& spec, const paillier::PublicKey& pk, SetpointSchedule schedule)
      : spec_(spec), pk_(pk), schedule_(std::move(schedule)) {}

  const CipherVector& at(std::uint64_t k) {
    const RealVector& value = schedule_.at(k);
    if (!cached_value_ || *cached_value_ != value) {
      const ResidueVector residues = encode_signals(spec_, value);
      cached_.clear();
      for (const auto r : residues) cached_.push_back(paillier::encrypt_deterministic(pk_, BigUint{r}));
      cached_value_ = value;
    }
    return cached_;
  }

 private:
  const ControllerSpec& spec_;
  const paillier::PublicKey& pk_;
  SetpointSchedule schedule_;
  std::optional<RealVector> cached_value_;
  CipherVector cached_;
};

struct ControllerServiceOptions {
  /// Steps whose ControlBatch is computed but not sent (fault injection).
  std::set<std::uint64_t> drop_control_at;
};

struct ControllerServiceStats {
  std::uint64_t steps = 0;
  std::uint64_t discarded = 0;  ///< out-of-order frames
  std::uint64_t dropped = 0;    ///< ControlBatches withheld by fault injection
};

/// Serves one plant session until Shutdown. `setpoints` must be set when the
/// session uses deterministic setpoints.
inline ControllerServiceStats serve_controller_session(net::Channel& channel, ControllerCore& core,
                                                       const wire::SessionParams& local,
                                                       std::optional<SetpointSchedule> setpoints = std::nullopt,
                                                       const ControllerServiceOptions& options = {}) {
  const ControllerSpec& spec = core.spec();
  const paillier::PublicKey& pk = core.public_key();

  const auto hello = channel.receive();
  if (!hello) throw ProtocolError("no Hello received");
  const wire::SessionParams remote = wire::parse_hello(*hello);
  if (const auto field = wire::first_mismatch(local, remote)) {
    const std::string reason = "session parameters differ in " + *field;
    channel.send(wire::shutdown_frame(0, reason));
    throw ProtocolError("session refused: " + reason);
  }
  channel.send(wire::hello_frame(local));
  log().info("controller: session accepted (key {} bits, n' = {})", local.key_bits, local.n_prime);

  std::optional<DeterministicSetpoints> fixed;
  if (local.setpoint_mode == wire::SetpointMode::deterministic) {
    if (!setpoints) throw ConfigError("deterministic setpoints need a configured setpoint schedule");
    fixed.emplace(spec, pk, *setpoints);
  }

  ControllerServiceStats stats;
  std::map<std::uint64_t, CipherVector> pending_setpoints;
  for (;;) {
    auto frame = channel.receive();
    if (!frame) continue;
    const std::uint64_t expected = core.step();
    switch (frame->type) {
      case wire::MessageType::shutdown:
        log().info("controller: shutdown after {} steps", stats.steps);
        return stats;
      case wire::MessageType::setpoint:
        if (frame->seq < expected) {
          log().warn("controller: discarding stale SetpointBatch {} (at step {})", frame->seq, expected);
          ++stats.discarded;
          break;
        }
        pending_setpoints[frame->seq] = wire::batch_ciphertexts(*frame, pk, spec.n_y);
        break;
      case wire::MessageType::measurement: {
        if (frame->seq < expected) {
          log().warn("controller: discarding stale MeasurementBatch {} (at step {})", frame->seq, expected);
          ++stats.discarded;
          break;
        }
        if (frame->seq > expected) {
          throw ProtocolError("MeasurementBatch " + std::to_string(frame->seq) + " skips ahead of step " +
                              std::to_string(expected));
        }
        const CipherVector y = wire::batch_ciphertexts(*frame, pk, spec.n_y);
        CipherVector s;
        if (fixed) {
          s = fixed->at(expected);
        } else {
          const auto it = pending_setpoints.find(expected);
          if (it == pending_setpoints.end()) throw ProtocolError("no SetpointBatch for step " + std::to_string(expected));
          s = std::move(it->second);
          pending_setpoints.erase(pending_setpoints.begin(), std::next(it));
        }
        const CipherVector u = core.generate_control();
        if (options.drop_control_at.contains(expected)) {
          ++stats.dropped;
        } else {
          channel.send(wire::batch_frame(wire::MessageType::control, expected, pk, u));
        }
        core.update_state(s, y);
        ++stats.steps;
        break;
      }
      default:
        throw ProtocolError("unexpected " + std::string(wire::to_string(frame->type)) + " at the controller");
    }
  }
}

}  // namespace cipherloop
