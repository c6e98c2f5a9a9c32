#include "denis/error.hpp"
#include "denis/northbound.hpp"
#include "denis/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace denis;

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, path + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::config, "cannot write " + path.string());
  return out;
}

std::string file_safe(std::string name) {
  for (auto& c : name)
    if (c == '/' || c == ' ') c = '_';
  return name;
}

void print_tables(const Summary& s) {
  std::set<double> rates;
  for (const auto& c : s.network) rates.insert(c.rate);
  for (double rate : rates) {
    std::printf("\nnetwork PDR %% at %g pkt/min\n%-8s %11s %11s %11s\n", rate, "density", "non-sliced", "logical",
                "physical");
    for (const auto& p : density_presets()) {
      std::printf("%-8s", std::string(p.name).c_str());
      for (std::string_view mode : {"non-sliced", "logical", "physical"}) {
        const auto m = cell_mean(s, p.name, mode, rate);
        if (m)
          std::printf(" %11.2f", *m * 100.0);
        else
          std::printf(" %11s", "-");
      }
      std::printf("\n");
    }
    std::printf("slice PDR %% at %g pkt/min\n%-8s %9s %9s %9s %9s\n", rate, "density", "log/A", "log/B", "phy/A",
                "phy/B");
    for (const auto& p : density_presets()) {
      std::printf("%-8s", std::string(p.name).c_str());
      for (std::string_view mode : {"logical", "physical"})
        for (std::string_view slice : {"A", "B"}) {
          const auto m = cell_mean(s, p.name, mode, rate, slice);
          if (m)
            std::printf(" %9.2f", *m * 100.0);
          else
            std::printf(" %9s", "-");
        }
      std::printf("\n");
    }
  }
  std::printf("\n");
  write_verdicts(std::cout, s.verdicts);
}

void write_summaries(const fs::path& dir, const Summary& s) {
  auto network = open_out(dir / "summary.csv");
  write_summary_csv(network, s.network);
  auto slices = open_out(dir / "slices.csv");
  write_summary_csv(slices, s.slices);
  auto verdicts = open_out(dir / "verdicts.txt");
  write_verdicts(verdicts, s.verdicts);
}

std::vector<ScenarioConfig> cells_from_config(const nlohmann::json& j, std::size_t seeds, bool logs) {
  if (j.contains("densities")) {
    auto m = matrix_from_json(j);
    if (seeds) {
      const auto first = m.seeds.empty() ? 1 : m.seeds.front();
      m.seeds.clear();
      for (std::size_t s = 0; s < seeds; ++s) m.seeds.push_back(first + s);
    }
    m.record_logs = logs;
    return m.cells();
  }
  const auto base = scenario_from_json(j);
  const auto count = seeds ? seeds : j.value("seeds", std::size_t{1});
  std::vector<ScenarioConfig> cells;
  for (std::size_t s = 0; s < count; ++s) {
    auto c = base;
    c.seed = base.seed + s;
    c.record_log = logs;
    c.name = base.name + "/" + std::to_string(c.seed);
    cells.push_back(std::move(c));
  }
  return cells;
}

int cmd_run(const std::string& config, std::size_t seeds, const std::string& out, std::size_t workers, bool logs) {
  const auto cells = cells_from_config(load_json(config), seeds, logs);
  const fs::path dir(out);
  fs::create_directories(dir);
  if (logs) fs::create_directories(dir / "logs");

  std::size_t done = 0;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_cells(cells, workers, [&](const RunResult& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s pdr=%.4f\n", done, cells.size(), r.config.name.c_str(), r.report.pdr);
    if (logs) {
      auto f = open_out(dir / "logs" / (file_safe(r.config.name) + ".log"));
      f << r.event_log;
    }
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "%zu runs in %.1f s\n", rows.size(), secs);

  auto csv = open_out(dir / "results.csv");
  write_results_csv(csv, rows);
  const auto summary = summarize(rows);
  write_summaries(dir, summary);
  print_tables(summary);
  return 0;
}

int cmd_summarize(const std::string& in) {
  const fs::path dir(in);
  std::ifstream csv(dir / "results.csv");
  if (!csv) throw Error(Errc::config, "no results.csv in " + in);
  const auto summary = summarize(read_results_csv(csv));
  write_summaries(dir, summary);
  print_tables(summary);
  return 0;
}

std::atomic<NorthboundServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const std::string& bind, const std::string& config, const std::string& density,
              const std::string& mode, double rate, std::uint64_t seed, double speed) {
  ScenarioConfig sc;
  if (!config.empty()) {
    sc = scenario_from_json(load_json(config));
  } else {
    sc.density = density_preset(density).level;
    sc.mode = slice_mode_from_string(mode);
    sc.traffic.rate_per_min = rate;
    sc.seed = seed;
  }
  std::string host = bind;
  int port = 8080;
  if (const auto colon = bind.rfind(':'); colon != std::string::npos) {
    host = bind.substr(0, colon);
    port = std::stoi(bind.substr(colon + 1));
  }
  SimSession session(sc);
  session.set_speed(speed);
  NorthboundServer server(session);
  const int bound = server.bind(host, port);
  std::fprintf(stderr, "northbound API on http://%s:%d (simulator paused)\n", host.c_str(), bound);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DENIS-SDN scenario runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario sweep and write CSV results");
  std::string config, out = "results";
  std::size_t seeds = 0, workers = std::max(1u, std::thread::hardware_concurrency());
  bool logs = false;
  run->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seeds", seeds, "seed count (default: from config)");
  run->add_option("--out", out, "output directory");
  run->add_option("--workers", workers, "parallel runs")->check(CLI::PositiveNumber);
  run->add_flag("--event-logs", logs, "write one event log per run under <out>/logs");

  auto* sum = app.add_subcommand("summarize", "summarize results.csv in a directory");
  std::string in;
  sum->add_option("--in", in, "directory holding results.csv")->required()->check(CLI::ExistingDirectory);

  auto* serve = app.add_subcommand("serve", "controller + paused simulator behind the northbound API");
  std::string bind = "127.0.0.1:8080", serve_config, density = "ultra", mode = "physical";
  double rate = 6.0, speed = 10.0;
  std::uint64_t seed = 1;
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--config", serve_config, "single-scenario JSON")->check(CLI::ExistingFile);
  serve->add_option("--density", density);
  serve->add_option("--mode", mode);
  serve->add_option("--rate", rate, "packets per minute per node");
  serve->add_option("--seed", seed);
  serve->add_option("--speed", speed, "simulated seconds per wall second, 0 = unpaced");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, seeds, out, workers, logs);
    if (*sum) return cmd_summarize(in);
    if (*serve) return cmd_serve(bind, serve_config, density, mode, rate, seed, speed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(e.reason()).c_str(), e.what());
    return 2;
  }
  return 1;
}
