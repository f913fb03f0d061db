#pragma once

// Minimum sampling period versus key length, measured on the in-process loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "cipherloop/closed_loop.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/paillier_private.hpp"
#include "cipherloop/presets.hpp"

namespace cipherloop {

/// Order statistic with linear interpolation, q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ParameterError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Shortest sampling period a step allows: the critical path, but also the
/// controller's full step (control + update) and, when randomizers overlap,
/// the plant interface's own work must fit in one period.
inline double step_min_period_us(const StepTiming& t) {
  const double controller_busy = t.control_us + t.update_us;
  const double plant_busy = t.encrypt_us + t.decrypt_us + t.randomizer_us;
  return std::max({t.total_us, controller_busy, plant_busy});
}

struct TimingRow {
  std::size_t key_bits = 0;
  std::size_t w = 0;
  RandomizerMode mode = RandomizerMode::overlap;
  std::size_t reps = 0;
  double encrypt_us = 0;  ///< medians of the stages
  double network_out_us = 0;
  double control_us = 0;
  double network_back_us = 0;
  double decrypt_us = 0;
  double update_us = 0;
  double randomizer_us = 0;
  double total_min_us = 0;
  double total_median_us = 0;
  double total_p99_us = 0;
  double min_period_median_us = 0;
  double min_period_p99_us = 0;
  bool exact = false;  ///< decrypted controls matched the integer controller

  double jitter_ratio() const { return total_p99_us / total_median_us; }
};

struct TimingOptions {
  std::size_t reps = 300;
  std::size_t warmup = 10;
  std::uint64_t seed = 1;
  RandomizerMode mode = RandomizerMode::overlap;
};

/// Times `reps` steps of the preset's encrypted loop with a key of the given
/// size. Setpoints are encrypted once at the controller with r = 1. The
/// controller's work does not depend on whether the key is large enough for
/// exact decryption; `exact` reports it.
inline TimingRow measure_key_length(const Preset& preset, const paillier::KeyPair& keys, const TimingOptions& options) {
  const ControllerSpec spec = preset.spec();
  LoopOptions loop;
  loop.steps = options.warmup + options.reps;
  loop.seed = options.seed;
  loop.setpoint_mode = wire::SetpointMode::deterministic;
  loop.randomizer = options.mode;
  const LoopResult run = run_in_process(preset, spec, keys, loop);

  std::vector<double> enc, out, ctl, back, dec, upd, rnd, total, period;
  for (std::size_t i = options.warmup; i < run.records.size(); ++i) {
    const StepTiming& t = run.records[i].timing;
    enc.push_back(t.encrypt_us);
    out.push_back(t.network_out_us);
    ctl.push_back(t.control_us);
    back.push_back(t.network_back_us);
    dec.push_back(t.decrypt_us);
    upd.push_back(t.update_us);
    rnd.push_back(t.randomizer_us);
    total.push_back(t.total_us);
    period.push_back(step_min_period_us(t));
  }
  TimingRow row;
  row.key_bits = keys.pub.key_bits();
  row.w = keys.pub.word_count();
  row.mode = options.mode;
  row.reps = options.reps;
  row.encrypt_us = quantile(enc, 0.5);
  row.network_out_us = quantile(out, 0.5);
  row.control_us = quantile(ctl, 0.5);
  row.network_back_us = quantile(back, 0.5);
  row.decrypt_us = quantile(dec, 0.5);
  row.update_us = quantile(upd, 0.5);
  row.randomizer_us = quantile(rnd, 0.5);
  row.total_min_us = *std::min_element(total.begin(), total.end());
  row.total_median_us = quantile(total, 0.5);
  row.total_p99_us = quantile(total, 0.99);
  row.min_period_median_us = quantile(period, 0.5);
  row.min_period_p99_us = quantile(period, 0.99);
  row.exact = run.summary.equivalent() && run.summary.overflow_steps == 0;
  return row;
}

/// One row per key length; keys are generated from the seed.
inline std::vector<TimingRow> measure_min_period(const std::vector<std::size_t>& key_bits_list, const Preset& preset,
                                                 const TimingOptions& options) {
  if (options.reps == 0) throw ParameterError("reps must be positive");
  std::vector<TimingRow> rows;
  for (const auto bits : key_bits_list) {
    SeededEntropy rng(options.seed ^ (bits * 0x9E3779B97F4A7C15ull));
    const paillier::KeyPair keys = paillier::keygen(bits, rng);
    rows.push_back(measure_key_length(preset, keys, options));
  }
  return rows;
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "key_bits,w,randomizer,reps,encrypt_us,network_out_us,control_us,network_back_us,decrypt_us,update_us,"
         "randomizer_us,total_min_us,total_median_us,total_p99_us,min_period_median_us,min_period_p99_us,exact\n";
  out.precision(8);
  for (const auto& r : rows) {
    out << r.key_bits << ',' << r.w << ',' << (r.mode == RandomizerMode::overlap ? "overlap" : "inline") << ',' << r.reps
        << ',' << r.encrypt_us << ',' << r.network_out_us << ',' << r.control_us << ',' << r.network_back_us << ','
        << r.decrypt_us << ',' << r.update_us << ',' << r.randomizer_us << ',' << r.total_min_us << ','
        << r.total_median_us << ',' << r.total_p99_us << ',' << r.min_period_median_us << ',' << r.min_period_p99_us
        << ',' << (r.exact ? 1 : 0) << '\n';
  }
}

}  // namespace cipherloop
