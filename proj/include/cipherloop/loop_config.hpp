#pragma once

// Loop configuration file: "key = value" lines, '#' comments.
//
//   preset           qube | static | reset_pi          (default qube)
//   key_bits         64 | 128 | 256 | 512 | 1024       (default: preset's)
//   n_prime, m, n    codec overrides                   (default: preset's)
//   T                reset period, integer or "inf"    (default: preset's)
//   sample_period_us tick length                       (default: preset's)
//   listen_addr      controller listen address         (default 127.0.0.1:47100)
//   peer_addr        plant connects here               (default 127.0.0.1:47100)
//   log_path         trajectory CSV                    (default: none)
//   key_file         key file (private for the plant, either kind for the controller)
//   seed             randomness seed for seeded runs   (default 1)
//   steps            steps to run                      (default 1000)
//   timeout_ms       wait for a ControlBatch before holding the last input
//   setpoint_mode    randomized | deterministic        (default randomized)
//   randomizer       overlap | inline                  (default overlap)
//   realtime         true | false: pace ticks at sample_period_us (default false)

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "cipherloop/error.hpp"
#include "cipherloop/fixed_codec.hpp"
#include "cipherloop/kv_file.hpp"
#include "cipherloop/presets.hpp"
#include "cipherloop/wire.hpp"

namespace cipherloop {

enum class RandomizerMode {
  overlap,  ///< next step's randomizers are computed while awaiting control
  inline_,  ///< randomizers are computed on the critical path
};

struct LoopConfig {
  std::string preset = "qube";
  std::optional<std::size_t> key_bits;
  PresetOverrides overrides;
  std::string listen_addr = "127.0.0.1:47100";
  std::string peer_addr = "127.0.0.1:47100";
  std::optional<std::filesystem::path> log_path;
  std::optional<std::filesystem::path> key_file;
  std::uint64_t seed = 1;
  std::uint64_t steps = 1000;
  std::optional<std::uint32_t> timeout_ms;
  wire::SetpointMode setpoint_mode = wire::SetpointMode::randomized;
  RandomizerMode randomizer = RandomizerMode::overlap;
  bool realtime = false;

  Preset resolved_preset() const { return apply_overrides(preset_by_name(preset), overrides); }
  std::size_t resolved_key_bits() const { return key_bits.value_or(resolved_preset().default_key_bits); }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("'" + std::string(key) + "' must be a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("'" + std::string(key) + "' must be true or false");
}

}  // namespace detail

inline ResetPeriod parse_reset_period(std::string_view text) {
  if (text == "inf" || text == "infinite" || text == "∞") return ResetPeriod::infinite();
  const auto t = detail::parse_number<std::uint64_t>("T", text);
  if (t == 0) throw ConfigError("T must be at least 1 or 'inf'");
  return ResetPeriod::finite(t);
}

inline LoopConfig loop_config_from(const KeyValues& kv) {
  static const std::set<std::string, std::less<>> known{
      "preset",   "key_bits", "n_prime",    "m",          "n",             "T",         "sample_period_us",
      "listen_addr", "peer_addr", "log_path", "key_file", "seed", "steps", "timeout_ms", "setpoint_mode",
      "randomizer", "realtime"};
  for (const auto& [key, value] : kv) {
    if (!known.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  LoopConfig cfg;
  const auto get = [&](std::string_view key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("preset")) {
    preset_by_name(*v);
    cfg.preset = *v;
  }
  if (const auto* v = get("key_bits")) cfg.key_bits = detail::parse_number<std::size_t>("key_bits", *v);
  if (const auto* v = get("n_prime")) cfg.overrides.n_prime = detail::parse_number<unsigned>("n_prime", *v);
  if (const auto* v = get("m")) cfg.overrides.m = detail::parse_number<unsigned>("m", *v);
  if (const auto* v = get("n")) cfg.overrides.n = detail::parse_number<unsigned>("n", *v);
  if (const auto* v = get("T")) cfg.overrides.period = parse_reset_period(*v);
  if (const auto* v = get("sample_period_us")) {
    cfg.overrides.sample_period_us = detail::parse_number<std::uint32_t>("sample_period_us", *v);
  }
  if (const auto* v = get("listen_addr")) cfg.listen_addr = *v;
  if (const auto* v = get("peer_addr")) cfg.peer_addr = *v;
  if (const auto* v = get("log_path"); v && !v->empty()) cfg.log_path = *v;
  if (const auto* v = get("key_file"); v && !v->empty()) cfg.key_file = *v;
  if (const auto* v = get("seed")) cfg.seed = detail::parse_number<std::uint64_t>("seed", *v);
  if (const auto* v = get("steps")) cfg.steps = detail::parse_number<std::uint64_t>("steps", *v);
  if (const auto* v = get("timeout_ms")) cfg.timeout_ms = detail::parse_number<std::uint32_t>("timeout_ms", *v);
  if (const auto* v = get("setpoint_mode")) {
    if (*v == "randomized") {
      cfg.setpoint_mode = wire::SetpointMode::randomized;
    } else if (*v == "deterministic") {
      cfg.setpoint_mode = wire::SetpointMode::deterministic;
    } else {
      throw ConfigError("setpoint_mode must be randomized or deterministic");
    }
  }
  if (const auto* v = get("randomizer")) {
    if (*v == "overlap") {
      cfg.randomizer = RandomizerMode::overlap;
    } else if (*v == "inline") {
      cfg.randomizer = RandomizerMode::inline_;
    } else {
      throw ConfigError("randomizer must be overlap or inline");
    }
  }
  if (const auto* v = get("realtime")) cfg.realtime = detail::parse_bool("realtime", *v);
  return cfg;
}

inline LoopConfig read_loop_config(const std::filesystem::path& path) { return loop_config_from(read_key_values(path)); }

}  // namespace cipherloop
