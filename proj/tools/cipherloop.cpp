// cipherloop: key generation, self-tests, closed-loop runs and benchmarks.
//
// Exit codes: 0 success, 1 validation failure (bad flags, configuration or
// parameters), 2 runtime fault.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cipherloop/closed_loop.hpp"
#include "cipherloop/controller_service.hpp"
#include "cipherloop/loop_config.hpp"
#include "cipherloop/paillier_private.hpp"
#include "cipherloop/selftest.hpp"
#include "cipherloop/spec_export.hpp"
#include "cipherloop/timing.hpp"

namespace cl = cipherloop;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// A check whose failure is reported as a runtime fault rather than bad input.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string describe_period(const cl::ResetPeriod& p) { return p.to_string(); }

void print_parameters(const cl::Preset& preset, const cl::ControllerSpec& spec, const cl::paillier::PublicKey& pk) {
  std::cout << "preset " << preset.name << ": n = " << spec.codec.n << ", m = " << spec.codec.m
            << ", n' = " << spec.codec.n_prime << ", T = " << describe_period(spec.period) << ", dims (n_x, n_y, n_u) = ("
            << spec.n_x << ", " << spec.n_y << ", " << spec.n_u << ")\n"
            << "key: " << pk.key_bits() << " bits, w = " << pk.word_count() << ", ciphertext " << pk.ciphertext_bytes()
            << " bytes; plaintexts reach " << cl::plaintext_bound(spec).max_bits() << " bits\n";
}

void print_summary(const cl::Preset& preset, const cl::LoopResult& run) {
  const auto& s = run.summary;
  std::cout << "steps: " << s.steps << '\n';
  std::cout << "equivalence (encrypted vs integer controller): ";
  if (s.steps == 0) {
    std::cout << "no steps\n";
  } else if (s.equivalent()) {
    std::cout << "exact (" << s.exact << "/" << s.exact + s.held << " decrypted steps)\n";
  } else {
    std::cout << "MISMATCH in " << s.mismatched << " of " << s.steps << " steps\n";
  }
  if (s.overflow_steps > 0) std::cout << "warning: integer controller left the n'-bit range in " << s.overflow_steps << " steps\n";
  std::cout << "held inputs: " << s.held << ", quantizer saturations: " << s.saturations << '\n';
  if (!run.records.empty()) {
    std::vector<double> total;
    for (const auto& r : run.records) total.push_back(r.timing.total_us);
    std::cout << "critical path: median " << cl::quantile(total, 0.5) << " us, p99 " << cl::quantile(total, 0.99)
              << " us; deadline misses " << s.deadline_misses << "/" << s.steps << " at " << preset.sample_period_us
              << " us\n";
  }
}

cl::paillier::KeyPair load_or_generate(const std::optional<std::string>& key_path, std::size_t bits, std::uint64_t seed) {
  if (key_path) return cl::paillier::read_key_pair(*key_path);
  std::cout << "no --key given: generating a " << bits << "-bit key from seed " << seed << '\n';
  cl::SeededEntropy rng(seed);
  return cl::paillier::keygen(bits, rng);
}

/// Controller spec validated against the key, before any step runs.
cl::ControllerSpec validated_spec(const cl::Preset& preset, std::size_t key_bits) {
  cl::ControllerSpec spec = preset.spec();
  cl::validate_for_key(spec, key_bits);
  return spec;
}

cl::LoopOptions loop_options(const cl::LoopConfig& cfg) {
  cl::LoopOptions o;
  o.steps = cfg.steps;
  o.seed = cfg.seed;
  o.setpoint_mode = cfg.setpoint_mode;
  o.randomizer = cfg.randomizer;
  o.realtime = cfg.realtime;
  if (cfg.timeout_ms) o.control_timeout = std::chrono::milliseconds(*cfg.timeout_ms);
  return o;
}

void finish_run(const cl::LoopConfig& cfg, const cl::Preset& preset, const cl::LoopResult& run, bool networked) {
  if (cfg.log_path) {
    cl::write_trajectory_csv(*cfg.log_path, preset, run.records, networked);
    std::cout << "trajectory: " << cfg.log_path->string() << '\n';
  }
  print_summary(preset, run);
  if (!run.summary.equivalent()) throw RuntimeFailure("encrypted controller diverged from the integer controller");
}

int cmd_keygen(std::size_t bits, const std::string& out) {
  if (!cl::paillier::is_supported_key_bits(bits)) {
    throw cl::ParameterError("unsupported key length " + std::to_string(bits) + " (supported: 64, 128, 256, 512, 1024)");
  }
  cl::SystemEntropy rng;
  const cl::paillier::KeyPair keys = cl::paillier::keygen(bits, rng);
  const std::string pub_path = out + ".pub", key_path = out + ".key";
  cl::paillier::write_public_key(pub_path, keys.pub);
  cl::paillier::write_private_key(key_path, keys);
  const auto& pk = keys.pub;
  std::cout << "key_bits = " << pk.key_bits() << '\n'
            << "w = " << pk.word_count() << '\n'
            << "radix = 2^" << pk.ctx_n2().radix_exp() << '\n'
            << "ciphertext_bytes = " << pk.ciphertext_bytes() << '\n'
            << "public key: " << pub_path << '\n'
            << "private key: " << key_path << '\n';
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : cl::run_selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) std::cout << ": " << r.detail;
    std::cout << '\n';
    ok = ok && r.passed;
  }
  if (!ok) throw RuntimeFailure("self-test failed");
  return 0;
}

int cmd_run(const cl::LoopConfig& cfg, const std::optional<std::string>& key_path, bool networked) {
  const cl::Preset preset = cfg.resolved_preset();
  preset.spec();  // scale budget and shape checks before touching keys
  std::optional<std::string> path = key_path;
  if (!path && cfg.key_file) path = cfg.key_file->string();
  const cl::paillier::KeyPair keys = load_or_generate(path, cfg.resolved_key_bits(), cfg.seed);
  const cl::ControllerSpec spec = validated_spec(preset, keys.pub.key_bits());
  print_parameters(preset, spec, keys.pub);
  const cl::LoopOptions options = loop_options(cfg);

  if (!networked) {
    finish_run(cfg, preset, cl::run_in_process(preset, spec, keys, options), false);
    return 0;
  }
  // Built before the controller thread starts so that a bad configuration
  // cannot leave it blocked in accept().
  cl::PlantInterface plant(preset, spec, keys, options);
  cl::net::Listener listener(cl::net::parse_endpoint("127.0.0.1:0"));
  const auto port = listener.port();
  std::exception_ptr controller_error;
  std::jthread controller([&] {
    try {
      cl::net::Channel channel = listener.accept();
      cl::ControllerCore core(spec, keys.pub, options.order);
      const auto local = cl::wire::session_params(spec, keys.pub, preset.sample_period_us, options.setpoint_mode);
      cl::serve_controller_session(channel, core, local, preset.setpoint);
    } catch (...) {
      controller_error = std::current_exception();
    }
  });
  cl::LoopResult run;
  std::exception_ptr plant_error;
  try {
    cl::net::Channel channel = cl::net::connect({"127.0.0.1", port});
    run = cl::run_plant_session(channel, plant, options);
  } catch (...) {
    plant_error = std::current_exception();
  }
  controller.join();
  if (plant_error) std::rethrow_exception(plant_error);
  if (controller_error) std::rethrow_exception(controller_error);
  finish_run(cfg, preset, run, true);
  return 0;
}

int cmd_serve_controller(const cl::LoopConfig& cfg, const std::optional<std::string>& key_path) {
  const cl::Preset preset = cfg.resolved_preset();
  const auto path = key_path ? std::optional<std::filesystem::path>(*key_path) : cfg.key_file;
  if (!path) throw cl::ConfigError("serve-controller needs a key file (key_file or --key); the public key is enough");
  const cl::paillier::PublicKey pk = cl::paillier::read_public_key(*path);
  const cl::ControllerSpec spec = validated_spec(preset, pk.key_bits());
  const auto where = cl::net::parse_endpoint(cfg.listen_addr);
  cl::net::Listener listener(where);
  std::cout << "controller listening on " << where.host << ":" << listener.port() << std::endl;
  cl::net::Channel channel = listener.accept();
  cl::ControllerCore core(spec, pk);
  const auto local = cl::wire::session_params(spec, pk, preset.sample_period_us, cfg.setpoint_mode);
  const auto stats = cl::serve_controller_session(channel, core, local, preset.setpoint);
  std::cout << "session ended after " << stats.steps << " steps (" << stats.discarded << " stale frames discarded)\n";
  return 0;
}

int cmd_serve_plant(const cl::LoopConfig& cfg, const std::optional<std::string>& key_path) {
  const cl::Preset preset = cfg.resolved_preset();
  const auto path = key_path ? std::optional<std::filesystem::path>(*key_path) : cfg.key_file;
  if (!path) throw cl::ConfigError("serve-plant needs the private key file (key_file or --key)");
  const cl::paillier::KeyPair keys = cl::paillier::read_key_pair(*path);
  const cl::ControllerSpec spec = validated_spec(preset, keys.pub.key_bits());
  print_parameters(preset, spec, keys.pub);
  const cl::LoopOptions options = loop_options(cfg);
  cl::net::Channel channel = cl::net::connect(cl::net::parse_endpoint(cfg.peer_addr));
  cl::PlantInterface plant(preset, spec, keys, options);
  finish_run(cfg, preset, cl::run_plant_session(channel, plant, options), true);
  return 0;
}

std::vector<std::size_t> parse_bits_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto bits = cl::detail::parse_number<std::size_t>("--bits", cl::detail::trim(item));
    if (!cl::paillier::is_supported_key_bits(bits)) throw cl::ParameterError("unsupported key length " + item);
    out.push_back(bits);
  }
  if (out.empty()) throw cl::ParameterError("--bits needs at least one key length");
  return out;
}

int cmd_bench(const cl::LoopConfig& cfg, const std::string& bits_text, std::size_t reps, const std::string& mode,
              const std::optional<std::string>& out_path) {
  const std::vector<std::size_t> bits = parse_bits_list(bits_text);
  const cl::Preset preset = cfg.resolved_preset();
  preset.spec();
  std::vector<cl::RandomizerMode> modes;
  if (mode == "overlap" || mode == "both") modes.push_back(cl::RandomizerMode::overlap);
  if (mode == "inline" || mode == "both") modes.push_back(cl::RandomizerMode::inline_);
  std::vector<cl::TimingRow> rows;
  for (const auto m : modes) {
    cl::TimingOptions options;
    options.reps = reps;
    options.seed = cfg.seed;
    options.mode = m;
    const auto part = cl::measure_min_period(bits, preset, options);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (out_path) {
    std::ofstream out(*out_path);
    if (!out) throw cl::IoError("cannot write " + *out_path);
    cl::write_timing_csv(out, rows);
    std::cout << "timing table: " << *out_path << '\n';
  } else {
    cl::write_timing_csv(std::cout, rows);
  }
  std::cout << "preset " << preset.name << ", " << reps << " steps per key length\n";
  for (const auto& r : rows) {
    std::cout << r.key_bits << " bits (" << (r.mode == cl::RandomizerMode::overlap ? "overlap" : "inline")
              << "): critical path median " << r.total_median_us << " us, minimum sampling period " << r.min_period_median_us
              << " us (p99 " << r.min_period_p99_us << " us), p99/median " << r.jitter_ratio()
              << (r.exact ? "" : "; key too short for exact decryption of this controller") << '\n';
  }
  return 0;
}

int cmd_export(const cl::LoopConfig& cfg, const std::optional<std::string>& out_path) {
  const cl::ControllerSpec spec = cfg.resolved_preset().spec();
  if (out_path) {
    std::ofstream out(*out_path);
    if (!out) throw cl::IoError("cannot write " + *out_path);
    cl::write_controller_spec(out, spec);
  } else {
    cl::write_controller_spec(std::cout, spec);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted control loop: Paillier-encrypted linear controller over a simulated plant"};
  app.require_subcommand(1);

  std::string config_path;
  cl::LoopConfig cfg;
  std::optional<std::string> preset_flag, key_flag, log_flag, out_flag;
  std::optional<std::uint64_t> steps_flag, seed_flag;
  bool networked = false;
  std::size_t bits = 0;
  std::string bits_list = "64,128,256,512";
  std::size_t reps = 300;
  std::string mode = "overlap";

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Loop configuration file")->check(CLI::ExistingFile);
  };

  auto* keygen = app.add_subcommand("keygen", "Generate a Paillier key pair");
  keygen->add_option("--bits", bits, "Modulus length: 64, 128, 256, 512 or 1024")->required();
  keygen->add_option("--out", out_flag, "Output prefix; writes PREFIX.pub and PREFIX.key")->required();

  auto* selftest = app.add_subcommand("selftest", "Run built-in correctness checks");
  selftest->add_option("--seed", seed_flag, "Seed for keys and randomizers");

  auto* run = app.add_subcommand("run", "Run the closed loop (in-process, or over loopback with --networked)");
  add_config(run);
  run->add_option("--preset", preset_flag, "qube, static or reset_pi");
  run->add_option("--steps", steps_flag, "Number of steps");
  run->add_option("--key", key_flag, "Private key file (generated from the seed if omitted)");
  run->add_flag("--networked", networked, "Run controller and plant as two services over loopback TCP");
  run->add_option("--seed", seed_flag, "Seed for randomizers and generated keys");
  run->add_option("--log", log_flag, "Trajectory CSV path");

  auto* serve_plant = app.add_subcommand("serve-plant", "Plant interface service (holds the private key)");
  add_config(serve_plant);
  serve_plant->add_option("--key", key_flag, "Private key file");

  auto* serve_controller = app.add_subcommand("serve-controller", "Controller service (public key only)");
  add_config(serve_controller);
  serve_controller->add_option("--key", key_flag, "Public (or private) key file; only N is read");

  auto* bench = app.add_subcommand("bench", "Minimum sampling period versus key length");
  add_config(bench);
  bench->add_option("--bits", bits_list, "Comma-separated key lengths");
  bench->add_option("--reps", reps, "Timed steps per key length")->check(CLI::PositiveNumber);
  bench->add_option("--randomizer", mode, "overlap, inline or both")->check(CLI::IsMember({"overlap", "inline", "both"}));
  bench->add_option("--preset", preset_flag, "qube, static or reset_pi");
  bench->add_option("--seed", seed_flag, "Seed for keys and randomizers");
  bench->add_option("--out", out_flag, "CSV path (stdout if omitted)");

  auto* export_cmd = app.add_subcommand("export", "Print the encoded controller the controller service runs");
  add_config(export_cmd);
  export_cmd->add_option("--preset", preset_flag, "qube, static or reset_pi");
  export_cmd->add_option("--out", out_flag, "Output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (!config_path.empty()) cfg = cl::read_loop_config(config_path);
    if (preset_flag) {
      cl::preset_by_name(*preset_flag);
      cfg.preset = *preset_flag;
    }
    if (steps_flag) cfg.steps = *steps_flag;
    if (seed_flag) cfg.seed = *seed_flag;
    if (log_flag) cfg.log_path = *log_flag;

    if (keygen->parsed()) return cmd_keygen(bits, *out_flag);
    if (selftest->parsed()) return cmd_selftest(cfg.seed);
    if (run->parsed()) return cmd_run(cfg, key_flag, networked);
    if (serve_plant->parsed()) return cmd_serve_plant(cfg, key_flag);
    if (serve_controller->parsed()) return cmd_serve_controller(cfg, key_flag);
    if (bench->parsed()) return cmd_bench(cfg, bits_list, reps, mode, out_flag);
    if (export_cmd->parsed()) return cmd_export(cfg, out_flag);
  } catch (const cl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const cl::ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
