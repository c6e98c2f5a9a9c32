#pragma once

#include "denis/controller.hpp"
#include "denis/error.hpp"
#include "denis/scenario.hpp"
#include "denis/sim.hpp"

#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace denis {

/// A controller with a live simulator attached. Plan changes reach the
/// simulator as new flow tables, slice assignments and channel retunes.
/// The simulator starts paused.
class SimSession {
public:
  explicit SimSession(const ScenarioConfig& config);
  ~SimSession();
  SimSession(const SimSession&) = delete;
  SimSession& operator=(const SimSession&) = delete;

  Controller& controller() noexcept { return *controller_; }

  /// Runs in a background thread at `speed` simulated seconds per wall
  /// second (0 = as fast as possible) until paused or finished.
  void start();
  void pause();
  /// Processes up to `events` events while paused or running.
  std::uint64_t step(std::uint64_t events = 1);
  void set_speed(double sim_seconds_per_second);

  PdrReport report() const;
  nlohmann::json status() const;
  std::string event_log() const;

private:
  void run_loop();

  ScenarioConfig config_;
  std::unique_ptr<Controller> controller_;
  std::unique_ptr<Simulation> sim_;
  mutable std::mutex sim_mutex_;
  struct Runner;
  std::unique_ptr<Runner> runner_;
};

/// HTTP+JSON front of a controller (and optionally a simulator session).
///
///   GET  /topology            {nodes:[{id,x,y,role,category,degree}], edges:[[u,v]]}
///   GET  /plan                SlicePlan
///   PUT  /plan                SlicePlan -> {epoch, rerouted, unreachable, retunes}
///   POST /plan/delta          {moves:[{node,to_slice}], retunes:[{slice,channel}]} -> same
///   GET  /density             {"<id>": {tier, percentile}}
///   POST /codet/run?slice=ID  [ConnectivityReport]
///   GET  /codet/reports       [ConnectivityReport]
///   GET  /flows               {"<node>": [{match_destination, action_next_hop, slice}]}
///   GET  /pdr                 PdrReport
///   GET  /sim/status          {state, now, duration, events, ...}
///   POST /sim/start|pause|step[?events=N]
///
/// Errors are {error, reason}; reason is one of the Errc names. Validation
/// problems map to 4xx, anything else to 500.
class NorthboundServer {
public:
  explicit NorthboundServer(Controller& controller, SimSession* session = nullptr);
  explicit NorthboundServer(SimSession& session);
  ~NorthboundServer();
  NorthboundServer(const NorthboundServer&) = delete;
  NorthboundServer& operator=(const NorthboundServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  /// serve() on a background thread.
  void start();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code.
int http_status(Errc code) noexcept;

}  // namespace denis
