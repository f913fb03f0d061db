#pragma once

// Controller service on a thread, plant interface on the calling thread, over loopback.

#include <exception>
#include <optional>
#include <thread>

#include "cipherloop/closed_loop.hpp"
#include "cipherloop/controller_service.hpp"

namespace testnet {

using namespace cipherloop;

struct NetworkedRun {
  LoopResult plant;
  ControllerServiceStats controller;
};

/// Runs the controller service on a thread and the plant interface here.
inline NetworkedRun run_networked(const Preset& preset, const paillier::KeyPair& keys, const LoopOptions& options,
                                const ControllerServiceOptions& service = {},
                                std::optional<ControllerSpec> controller_spec = {}) {
  const ControllerSpec spec = preset.spec();
  const ControllerSpec cspec = controller_spec.value_or(spec);
  PlantInterface plant(preset, spec, keys, options);
  net::Listener listener(net::parse_endpoint("127.0.0.1:0"));
  const auto port = listener.port();
  NetworkedRun out;
  std::exception_ptr controller_error;
  std::jthread controller([&] {
    try {
      net::Channel channel = listener.accept();
      ControllerCore core(cspec, keys.pub, options.order);
      const auto local = wire::session_params(cspec, keys.pub, preset.sample_period_us, options.setpoint_mode);
      out.controller = serve_controller_session(channel, core, local, preset.setpoint, service);
    } catch (...) {
      controller_error = std::current_exception();
    }
  });
  std::exception_ptr plant_error;
  try {
    net::Channel channel = net::connect({"127.0.0.1", port});
    out.plant = run_plant_session(channel, plant, options);
  } catch (...) {
    plant_error = std::current_exception();
  }
  controller.join();
  if (plant_error) std::rethrow_exception(plant_error);
  if (controller_error) std::rethrow_exception(controller_error);
  return out;
}

}  // namespace testnet
