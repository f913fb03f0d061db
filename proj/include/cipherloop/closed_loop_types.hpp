#pragma once

// Per-step records and summaries of a closed-loop run.

#include <cstdint>
#include <vector>

#include "cipherloop/matrix.hpp"

namespace cipherloop {

/// Durations in microseconds. The critical path is encrypt → controller →
/// decrypt; update_us and randomizer_us are off it when the randomizer
/// overlaps.
struct StepTiming {
  double encrypt_us = 0;      ///< encode + encrypt (+ randomizers when computed inline)
  double network_out_us = 0;  ///< in-process: MeasurementBatch framing
  double control_us = 0;      ///< in-process: GenerateControl
  double network_back_us = 0; ///< in-process: ControlBatch framing
  double round_trip_us = 0;   ///< networked: MeasurementBatch sent → ControlBatch received
  double decrypt_us = 0;      ///< decrypt + decode + actuator
  double update_us = 0;       ///< in-process: UpdateState
  double randomizer_us = 0;   ///< precompute for this step, when overlapped
  double total_us = 0;        ///< critical path
};

struct StepRecord {
  std::uint64_t k = 0;
  double time_s = 0;
  RealVector y;            ///< plant outputs sampled at k
  RealVector u_control;    ///< decoded control (or the held input)
  RealVector u_applied;    ///< after the actuator limits
  RealVector u_reference;  ///< integer controller, decoded
  bool held = false;
  bool matched = false;
  bool deadline_missed = false;
  StepTiming timing;
};

struct LoopSummary {
  std::uint64_t steps = 0;
  std::uint64_t exact = 0;           ///< steps whose decrypted control equals the integer controller's
  std::uint64_t mismatched = 0;
  std::uint64_t held = 0;            ///< steps without a ControlBatch
  std::uint64_t deadline_misses = 0; ///< critical path longer than the sample period
  std::uint64_t overflow_steps = 0;  ///< integer controller left the n'-bit range
  std::uint64_t saturations = 0;     ///< signals clamped by the quantizer

  bool equivalent() const noexcept { return mismatched == 0; }
};

struct LoopResult {
  std::vector<StepRecord> records;
  LoopSummary summary;
  std::uint64_t stale_frames = 0;

  std::vector<RealVector> controls() const {
    std::vector<RealVector> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.u_control);
    return out;
  }
};

}  // namespace cipherloop
