#include "denis/northbound.hpp"

#include "denis/error.hpp"
#include "denis/json_io.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <thread>

namespace denis {

using nlohmann::json;

struct SimSession::Runner {
  std::mutex mutex;
  std::condition_variable wake;
  bool running = false;
  bool quit = false;
  double speed = 10.0;
  std::thread thread;
};

SimSession::SimSession(const ScenarioConfig& config) : config_(config), runner_(std::make_unique<Runner>()) {
  Deployment d = config.deployment ? *config.deployment : build_arena(config.density, config.mode, config.arena);
  if (d.plan.mode == SliceMode::physical) d.plan = assign_channels(std::move(d.plan), config.channel_requests);
  controller_ = std::make_unique<Controller>(d.nodes, config.comm_range, d.plan);

  SimConfig sc;
  sc.traffic = config.traffic;
  sc.duration = config.duration;
  sc.seed = config.seed;
  sc.mac = config.mac;
  sc.reactive = config.reactive;
  sc.record_log = config.record_log;
  const auto snap = controller_->snapshot();
  sim_ = std::make_unique<Simulation>(controller_->nodes(), config.comm_range, snap->plan, snap->flows, sc);
  sim_->set_route_resolver([this](NodeId node, NodeId dest) { return controller_->resolve_next_hop(node, dest); });

  controller_->on_retune([this](std::span<const RetuneDirective> directives) {
    std::lock_guard lock(sim_mutex_);
    sim_->retune(directives);
  });
  controller_->on_flows([this](const ControllerSnapshot& s) {
    std::lock_guard lock(sim_mutex_);
    sim_->update_plan(s.plan);
    sim_->update_flows(s.flows);
  });
  runner_->thread = std::thread([this] { run_loop(); });
}

SimSession::~SimSession() {
  {
    std::lock_guard lock(runner_->mutex);
    runner_->quit = true;
  }
  runner_->wake.notify_all();
  runner_->thread.join();
}

void SimSession::start() {
  {
    std::lock_guard lock(runner_->mutex);
    runner_->running = true;
  }
  runner_->wake.notify_all();
}

void SimSession::pause() {
  std::lock_guard lock(runner_->mutex);
  runner_->running = false;
}

void SimSession::set_speed(double sim_seconds_per_second) {
  if (sim_seconds_per_second < 0.0) throw Error(Errc::validation, "speed must not be negative");
  std::lock_guard lock(runner_->mutex);
  runner_->speed = sim_seconds_per_second;
}

std::uint64_t SimSession::step(std::uint64_t events) {
  std::lock_guard lock(sim_mutex_);
  std::uint64_t done = 0;
  while (done < events && sim_->step()) ++done;
  return done;
}

void SimSession::run_loop() {
  using clock = std::chrono::steady_clock;
  constexpr auto tick = std::chrono::milliseconds(50);
  auto last = clock::now();
  for (;;) {
    double speed = 0.0;
    {
      std::unique_lock lock(runner_->mutex);
      runner_->wake.wait(lock, [&] { return runner_->quit || runner_->running; });
      if (runner_->quit) return;
      speed = runner_->speed;
    }
    const auto now = clock::now();
    const double elapsed = std::min(std::chrono::duration<double>(now - last).count(), 1.0);
    last = now;
    bool done = false;
    {
      std::lock_guard lock(sim_mutex_);
      if (speed > 0.0)
        sim_->run_until(sim_->now() + elapsed * speed);
      else
        for (int i = 0; i < 20000 && sim_->step(); ++i) {
        }
      done = sim_->finished();
    }
    if (done) {
      std::lock_guard lock(runner_->mutex);
      runner_->running = false;
      continue;
    }
    if (speed > 0.0) std::this_thread::sleep_for(tick);
  }
}

PdrReport SimSession::report() const {
  std::lock_guard lock(sim_mutex_);
  return sim_->report();
}

std::string SimSession::event_log() const {
  std::lock_guard lock(sim_mutex_);
  return sim_->log().text();
}

json SimSession::status() const {
  bool running = false;
  double speed = 0.0;
  {
    std::lock_guard lock(runner_->mutex);
    running = runner_->running;
    speed = runner_->speed;
  }
  std::lock_guard lock(sim_mutex_);
  const char* state = sim_->finished() ? "finished" : running ? "running" : "paused";
  return {{"state", state},
          {"now", sim_->now()},
          {"duration", sim_->config().duration},
          {"events", sim_->events_processed()},
          {"packets", sim_->packets().size()},
          {"speed", speed},
          {"seed", sim_->config().seed},
          {"rate", sim_->config().traffic.rate_per_min}};
}

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::config: return 400;
    case Errc::validation:
    case Errc::slice_capacity:
    case Errc::channel_conflict:
    case Errc::channel_range: return 422;
    case Errc::lookup: return 404;
    case Errc::route_unavailable: return 409;
    case Errc::consistency: return 500;
  }
  return 500;
}

namespace {

json outcome_json(const ReconfigurationOutcome& o) {
  json unreachable = json::object();
  for (const auto& [slice, nodes] : o.unreachable) unreachable[slice] = nodes;
  json retunes = json::array();
  for (const auto& r : o.retunes) retunes.push_back({{"node", r.node}, {"channel", r.channel}});
  return {{"epoch", o.epoch}, {"rerouted", o.rerouted}, {"unreachable", unreachable}, {"retunes", retunes}};
}

void send(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view reason, const std::string& message) {
  send(res, {{"error", message}, {"reason", reason}}, status);
}

}  // namespace

struct NorthboundServer::Impl {
  Controller& controller;
  SimSession* session;
  httplib::Server server;
  std::thread thread;

  Impl(Controller& c, SimSession* s) : controller(c), session(s) { routes(); }

  template <typename F>
  httplib::Server::Handler guarded(F handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), e.reason(), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, reason_of(Errc::validation), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  SimSession& need_session() {
    if (!session) throw Error(Errc::lookup, "no simulator attached");
    return *session;
  }

  void routes() {
    server.Get("/topology", guarded([this](const auto&, auto& res) {
      send(res, to_json(controller.nodes(), controller.graph()));
    }));
    server.Get("/plan", guarded([this](const auto&, auto& res) { send(res, to_json(*controller.plan())); }));
    server.Put("/plan", guarded([this](const auto& req, auto& res) {
      send(res, outcome_json(controller.set_plan(plan_from_json(json::parse(req.body)))));
    }));
    server.Post("/plan/delta", guarded([this](const auto& req, auto& res) {
      send(res, outcome_json(controller.apply_delta(delta_from_json(json::parse(req.body)))));
    }));
    server.Get("/density", guarded([this](const auto&, auto& res) { send(res, to_json(controller.density())); }));
    server.Get("/flows", guarded([this](const auto&, auto& res) { send(res, to_json(controller.snapshot()->flows)); }));
    server.Post("/codet/run", guarded([this](const httplib::Request& req, auto& res) {
      const double now = session ? session->status().at("now").get<double>() : 0.0;
      std::vector<ConnectivityReport> reports;
      if (req.has_param("slice")) {
        const SliceId slice = req.get_param_value("slice");
        if (!controller.plan()->find(slice)) throw Error(Errc::lookup, "unknown slice '" + slice + "'");
        reports = controller.codet().run(now, &slice);
      } else {
        reports = controller.codet().run(now);
      }
      json out = json::array();
      for (const auto& r : reports) out.push_back(to_json(r));
      send(res, out);
    }));
    server.Get("/codet/reports", guarded([this](const httplib::Request& req, auto& res) {
      std::vector<ConnectivityReport> reports;
      if (req.has_param("slice")) {
        const SliceId slice = req.get_param_value("slice");
        reports = controller.codet().reports(&slice);
      } else {
        reports = controller.codet().reports();
      }
      json out = json::array();
      for (const auto& r : reports) out.push_back(to_json(r));
      send(res, out);
    }));
    server.Get("/pdr", guarded([this](const auto&, auto& res) { send(res, to_json(need_session().report())); }));
    server.Get("/sim/status", guarded([this](const auto&, auto& res) { send(res, need_session().status()); }));
    server.Post("/sim/start", guarded([this](const httplib::Request& req, auto& res) {
      auto& s = need_session();
      if (req.has_param("speed")) s.set_speed(std::stod(req.get_param_value("speed")));
      s.start();
      send(res, s.status());
    }));
    server.Post("/sim/pause", guarded([this](const auto&, auto& res) {
      auto& s = need_session();
      s.pause();
      send(res, s.status());
    }));
    server.Post("/sim/step", guarded([this](const httplib::Request& req, auto& res) {
      auto& s = need_session();
      std::uint64_t events = 1;
      if (req.has_param("events")) {
        const auto text = req.get_param_value("events");
        try {
          events = std::stoull(text);
        } catch (const std::logic_error&) {
          throw Error(Errc::validation, "events must be a non-negative integer, got '" + text + "'");
        }
      }
      const auto done = s.step(events);
      auto status = s.status();
      status["stepped"] = done;
      send(res, status);
    }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "lookup", "no such endpoint");
    });
  }
};

NorthboundServer::NorthboundServer(Controller& controller, SimSession* session)
    : impl_(std::make_unique<Impl>(controller, session)) {}

NorthboundServer::NorthboundServer(SimSession& session) : NorthboundServer(session.controller(), &session) {}

NorthboundServer::~NorthboundServer() { stop(); }

int NorthboundServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::config, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(Errc::config, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void NorthboundServer::serve() { impl_->server.listen_after_bind(); }

void NorthboundServer::start() {
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void NorthboundServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace denis
