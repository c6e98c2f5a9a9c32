#include "denis/scenario.hpp"

#include "denis/error.hpp"
#include "denis/json_io.hpp"
#include "format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace denis {

namespace {

constexpr NodeId kFirstCorridor = 1;

NodeRecord router(NodeId id, Position p) { return {id, p, Role::border_router, "border-router"}; }

}  // namespace

Deployment build_arena(DensityLevel density, SliceMode mode, const ArenaShape& shape) {
  if (shape.corridor == 0 || shape.chairs == 0)
    throw Error(Errc::config, "arena needs at least one corridor and one chair node");
  const double s = density_preset(density).spacing;
  const std::size_t sensors = shape.corridor + shape.chairs;
  const NodeId first_chair = kFirstCorridor + static_cast<NodeId>(shape.corridor);
  const NodeId router_a = kFirstCorridor + static_cast<NodeId>(sensors);
  const NodeId router_b = router_a + 1;
  Deployment d;

  if (mode == SliceMode::non_sliced) {
    // Same census as the sliced layouts; categories kept for the dashboard.
    d.nodes = build_grid(sensors, s, {s / 2, s / 2}, kFirstCorridor, "chair");
    for (std::size_t i = 0; i < shape.corridor; ++i) d.nodes[i].category = "corridor";
    const double columns = std::ceil(std::sqrt(static_cast<double>(sensors)));
    d.nodes.push_back(router(router_a, {columns * s / 2, 0.0}));

    SliceSpec all{"main", {}, std::nullopt, router_a};
    d.plan = {SliceMode::non_sliced, {all}, "main"};
  } else {
    const double columns = std::ceil(std::sqrt(static_cast<double>(shape.chairs)));
    const double rows = std::ceil(static_cast<double>(shape.chairs) / columns);
    const double width = columns * s;   // chair block incl. half-spacing margins
    const double height = rows * s;
    const double corridor_y = height + s / 2;
    const double corridor_span = static_cast<double>(shape.corridor - 1) * s;

    d.nodes = build_linear(shape.corridor, s, {width / 2 - corridor_span / 2, corridor_y}, Axis::x,
                           kFirstCorridor, "corridor");
    auto chairs = build_grid(shape.chairs, s, {s / 2, s / 2}, first_chair, "chair");
    d.nodes.insert(d.nodes.end(), chairs.begin(), chairs.end());
    d.nodes.push_back(router(router_a, {width / 2, corridor_y + s}));
    d.nodes.push_back(router(router_b, {width / 2, 0.0}));

    SliceSpec a{"A", {}, std::nullopt, router_a};
    SliceSpec b{"B", {}, std::nullopt, router_b};
    for (NodeId id = kFirstCorridor; id < first_chair; ++id) a.members.insert(id);
    for (NodeId id = first_chair; id < router_a; ++id) b.members.insert(id);
    if (mode == SliceMode::physical) {
      a.channel = shape.corridor_channel;
      b.channel = shape.chair_channel;
    }
    d.plan = {mode, {a, b}, "B"};
  }

  std::set<NodeId> ids;
  for (const auto& n : d.nodes) ids.insert(n.id);
  d.plan = normalize_plan(std::move(d.plan), ids);
  return d;
}

RunResult run_scenario(const ScenarioConfig& config) {
  Deployment deployment = config.deployment ? *config.deployment : build_arena(config.density, config.mode, config.arena);
  if (deployment.plan.mode == SliceMode::physical)
    deployment.plan = assign_channels(std::move(deployment.plan), config.channel_requests);

  Controller controller(deployment.nodes, config.comm_range, deployment.plan);
  const auto snap = controller.snapshot();

  SimConfig sim_config;
  sim_config.traffic = config.traffic;
  sim_config.duration = config.duration;
  sim_config.seed = config.seed;
  sim_config.mac = config.mac;
  sim_config.reactive = config.reactive;
  sim_config.record_log = config.record_log;

  Simulation sim(controller.nodes(), config.comm_range, snap->plan, snap->flows, sim_config);
  sim.set_route_resolver([&](NodeId node, NodeId dest) { return controller.resolve_next_hop(node, dest); });

  RunResult result;
  result.config = config;
  result.report = sim.run();
  result.event_log = sim.log().text();
  for (const auto& p : sim.packets()) {
    if (p.fate != PacketFate::delivered) continue;
    auto it = snap->routes.find(p.origin);
    if (it == snap->routes.end() || it->second.hop_count() != p.hops) ++result.route_hop_mismatches;
  }
  return result;
}

std::vector<ScenarioConfig> MatrixConfig::cells() const {
  std::vector<ScenarioConfig> out;
  for (auto density : densities)
    for (auto mode : modes)
      for (double rate : rates)
        for (auto seed : seeds) {
          ScenarioConfig c;
          c.density = density;
          c.mode = mode;
          c.comm_range = comm_range;
          c.traffic = {rate, payload_bytes};
          c.duration = duration;
          c.seed = seed;
          c.mac = mac;
          c.arena = arena;
          c.record_log = record_logs;
          c.name = std::string(to_string(density)) + "/" + std::string(to_string(mode)) + "/" +
                   detail::shortest(rate) + "/" + std::to_string(seed);
          out.push_back(std::move(c));
        }
  return out;
}

MatrixConfig reference_matrix(std::size_t seeds) {
  MatrixConfig m;
  for (const auto& p : density_presets()) m.densities.push_back(p.level);
  m.modes = {SliceMode::non_sliced, SliceMode::logical, SliceMode::physical};
  m.rates = {6.0, 10.0};
  for (std::size_t s = 1; s <= seeds; ++s) m.seeds.push_back(s);
  return m;
}

ResultRow to_row(const RunResult& result) {
  ResultRow row;
  row.density = result.config.deployment ? "custom" : std::string(to_string(result.config.density));
  row.mode = std::string(to_string(result.config.mode));
  row.rate = result.config.traffic.rate_per_min;
  row.seed = result.config.seed;
  row.sent = result.report.sent;
  row.received = result.report.received;
  row.slices = result.report.per_slice;
  row.dropped_collision = result.report.dropped_collision;
  row.dropped_retry = result.report.dropped_retry;
  row.dropped_queue = result.report.dropped_queue;
  row.in_flight = result.report.in_flight;
  return row;
}

namespace {

std::vector<std::string> validate_cell(const ScenarioConfig& c) {
  std::vector<std::string> problems;
  auto fail = [&](const std::string& what) { problems.push_back(c.name + ": " + what); };
  if (!(c.traffic.rate_per_min > 0.0)) fail("traffic rate must be positive");
  if (c.traffic.payload_bytes == 0) fail("payload must be at least one byte");
  if (!(c.duration > 0.0)) fail("duration must be positive");
  if (!(c.comm_range > 0.0)) fail("communication range must be positive");
  if (c.mac.queue_capacity == 0) fail("queue capacity must be positive");
  if (!(c.mac.backoff_min > 0.0) || c.mac.backoff_max < c.mac.backoff_min) fail("invalid backoff window");
  try {
    auto d = c.deployment ? *c.deployment : build_arena(c.density, c.mode, c.arena);
    if (d.plan.mode == SliceMode::physical) d.plan = assign_channels(std::move(d.plan), c.channel_requests);
    Controller controller(d.nodes, c.comm_range, d.plan);
    for (const auto& [slice, nodes] : controller.snapshot()->unreachable)
      if (!nodes.empty() && !c.reactive)
        fail("slice '" + slice + "' has " + std::to_string(nodes.size()) + " nodes without a route");
  } catch (const Error& e) {
    fail(e.what());
  }
  return problems;
}

}  // namespace

std::vector<ResultRow> run_matrix(const MatrixConfig& matrix,
                                  const std::function<void(const RunResult&)>& on_result) {
  return run_cells(matrix.cells(), matrix.workers, on_result);
}

std::vector<ResultRow> run_cells(const std::vector<ScenarioConfig>& cells, std::size_t workers_wanted,
                                 const std::function<void(const RunResult&)>& on_result) {
  std::vector<std::string> problems;
  for (const auto& c : cells) {
    auto p = validate_cell(c);
    problems.insert(problems.end(), p.begin(), p.end());
  }
  if (cells.empty()) problems.push_back("the sweep has no cells");
  if (!problems.empty()) {
    std::string report = "invalid sweep:";
    for (const auto& p : problems) report += "\n  " + p;
    throw Error(Errc::config, report);
  }

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        auto result = run_scenario(cells[i]);
        rows[i] = to_row(result);
        std::lock_guard lock(sink);
        if (on_result) on_result(result);
      } catch (...) {
        std::lock_guard lock(sink);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const auto workers = std::max<std::size_t>(1, std::min(workers_wanted, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

namespace {

constexpr std::string_view kCsvHeader =
    "density,mode,rate,seed,sent,received,pdr,slices,dropped_collision,dropped_retry,dropped_queue,in_flight";

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(text);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    std::string slices;
    for (const auto& [id, c] : r.slices)
      slices += (slices.empty() ? "" : ";") + id + ":" + std::to_string(c.sent) + ":" + std::to_string(c.received);
    out << r.density << ',' << r.mode << ',' << detail::shortest(r.rate) << ',' << r.seed << ',' << r.sent << ','
        << r.received << ',' << detail::shortest(r.pdr()) << ',' << slices << ',' << r.dropped_collision << ','
        << r.dropped_retry << ',' << r.dropped_queue << ',' << r.in_flight << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == kCsvHeader) continue;
    const auto f = split(line, ',');
    if (f.size() != 12) throw Error(Errc::config, "results line " + std::to_string(line_no) + ": expected 12 fields");
    try {
      ResultRow r;
      r.density = f[0];
      r.mode = f[1];
      r.rate = std::stod(f[2]);
      r.seed = to_u64(f[3]);
      r.sent = to_u64(f[4]);
      r.received = to_u64(f[5]);
      for (const auto& entry : split(f[7], ';')) {
        if (entry.empty()) continue;
        const auto parts = split(entry, ':');
        if (parts.size() != 3) throw Error(Errc::config, "bad slice entry '" + entry + "'");
        r.slices[parts[0]] = {to_u64(parts[1]), to_u64(parts[2])};
      }
      r.dropped_collision = to_u64(f[8]);
      r.dropped_retry = to_u64(f[9]);
      r.dropped_queue = to_u64(f[10]);
      r.in_flight = to_u64(f[11]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(Errc::config, "results line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

namespace {

int density_rank(const std::string& name) {
  int i = 0;
  for (const auto& p : density_presets()) {
    if (p.name == name) return i;
    ++i;
  }
  return i;
}

int mode_rank(const std::string& name) {
  if (name == "non-sliced") return 0;
  if (name == "logical") return 1;
  if (name == "physical") return 2;
  return 3;
}

struct CellKey {
  std::string density;
  std::string mode;
  double rate;
  std::string slice;

  auto rank() const { return std::tuple(density_rank(density), density, mode_rank(mode), mode, rate, slice); }
  bool operator<(const CellKey& o) const { return rank() < o.rank(); }
};

struct CellValues {
  std::size_t runs = 0;
  std::vector<double> pdr;  // runs with a defined PDR
};

CellSummary summarize_cell(const CellKey& key, const CellValues& cell) {
  const auto& values = cell.pdr;
  CellSummary c{key.density, key.mode, key.rate, key.slice, cell.runs};
  if (values.empty()) {
    c.empty = true;
    return c;
  }
  double sum = 0.0;
  c.min = values.front();
  c.max = values.front();
  for (double v : values) {
    sum += v;
    c.min = std::min(c.min, v);
    c.max = std::max(c.max, v);
  }
  c.mean = sum / static_cast<double>(values.size());
  return c;
}

std::string pp(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f pp", fraction * 100.0);
  return buf;
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

}  // namespace

std::optional<double> cell_mean(const Summary& s, std::string_view density, std::string_view mode, double rate,
                                std::string_view slice) {
  const auto& list = slice.empty() ? s.network : s.slices;
  for (const auto& c : list)
    if (c.density == density && c.mode == mode && c.rate == rate && c.slice == slice && !c.empty) return c.mean;
  return std::nullopt;
}

Summary summarize(const std::vector<ResultRow>& rows) {
  std::map<CellKey, CellValues> network;
  std::map<CellKey, CellValues> slices;
  std::set<double> rates;
  for (const auto& r : rows) {
    rates.insert(r.rate);
    auto& cell = network[{r.density, r.mode, r.rate, {}}];
    ++cell.runs;
    if (r.sent) cell.pdr.push_back(r.pdr());
    for (const auto& [id, c] : r.slices) {
      auto& sc = slices[{r.density, r.mode, r.rate, id}];
      ++sc.runs;
      if (!c.undefined()) sc.pdr.push_back(c.pdr());
    }
  }
  Summary s;
  for (const auto& [key, values] : network) s.network.push_back(summarize_cell(key, values));
  for (const auto& [key, values] : slices) s.slices.push_back(summarize_cell(key, values));

  auto mean = [&](std::string_view d, std::string_view m, double rate, std::string_view slice = {}) {
    return cell_mean(s, d, m, rate, slice);
  };
  auto add = [&](std::string name, std::optional<bool> pass, std::string detail) {
    s.verdicts.push_back({std::move(name), pass.value_or(false), pass ? std::move(detail) : "missing cells"});
  };

  // Mode ordering at the two densest presets.
  for (std::string_view d : {"ultra", "extra"})
    for (double rate : rates) {
      const auto non = mean(d, "non-sliced", rate), log = mean(d, "logical", rate), phy = mean(d, "physical", rate);
      const std::string name = "mode-ordering/" + std::string(d) + "/" + detail::shortest(rate);
      if (!non || !log || !phy) {
        add(name, std::nullopt, {});
        continue;
      }
      add(name, *phy - *log >= 0.01 && *log - *non >= 0.01,
          "physical-logical " + pp(*phy - *log) + ", logical-non " + pp(*log - *non) + " (need >= +1.00 pp each)");
    }
  if (rates.count(10.0)) {
    const auto non = mean("ultra", "non-sliced", 10.0), phy = mean("ultra", "physical", 10.0);
    add("physical-gain/ultra/10", non && phy ? std::optional(*phy - *non >= 0.05) : std::nullopt,
        non && phy ? "physical-non " + pp(*phy - *non) + " (need >= +5.00 pp)" : "");
  }

  // Density degradation: medium -> ultra never improves by more than 1 pp per step.
  const std::vector<std::string> sparse_to_dense{"medium", "dense", "high", "extra", "ultra"};
  for (std::string_view mode : {"non-sliced", "logical", "physical"})
    for (double rate : rates) {
      const std::string name = "density-degradation/" + std::string(mode) + "/" + detail::shortest(rate);
      std::optional<bool> pass = true;
      std::string detail;
      for (std::size_t i = 0; i + 1 < sparse_to_dense.size(); ++i) {
        const auto sparser = mean(sparse_to_dense[i], mode, rate);
        const auto denser = mean(sparse_to_dense[i + 1], mode, rate);
        if (!sparser || !denser) {
          pass = std::nullopt;
          break;
        }
        const bool ok = *denser <= *sparser + 0.01;
        detail += (detail.empty() ? "" : ", ") + sparse_to_dense[i] + "->" + sparse_to_dense[i + 1] + " " +
                  pp(*denser - *sparser) + (ok ? "" : " (!)");
        if (!ok) *pass = false;
      }
      add(name, pass, detail);
    }
  if (rates.count(6.0)) {
    const auto nm = mean("medium", "non-sliced", 6.0), nu = mean("ultra", "non-sliced", 6.0);
    const auto pm = mean("medium", "physical", 6.0), pu = mean("ultra", "physical", 6.0);
    std::optional<bool> pass;
    std::string detail;
    if (nm && nu && pm && pu) {
      const double non_drop = *nm - *nu, phy_drop = *pm - *pu;
      pass = non_drop - phy_drop >= 0.02;
      detail = "non-sliced drop " + pp(non_drop) + ", physical drop " + pp(phy_drop) + " (need difference >= +2.00 pp)";
    }
    add("degradation-contrast/6", pass, detail);
  }

  // Slice A in physical mode.
  for (double rate : rates) {
    std::optional<bool> pass = true;
    std::string detail;
    for (const auto& d : sparse_to_dense) {
      const auto a = mean(d, "physical", rate, "A");
      if (!a) {
        pass = std::nullopt;
        break;
      }
      if (*a < 0.97) *pass = false;
      detail += (detail.empty() ? "" : ", ") + d + " " + pct(*a);
    }
    add("slice-a-robustness/" + detail::shortest(rate), pass, detail + " (need >= 97.00%)");
  }
  return s;
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << "density,mode,rate,slice,runs,mean_pdr,min_pdr,max_pdr,flag\n";
  for (const auto& c : cells) {
    out << c.density << ',' << c.mode << ',' << detail::shortest(c.rate) << ',' << c.slice << ',' << c.runs << ',';
    if (c.empty)
      out << ",,,empty\n";
    else
      out << detail::shortest(c.mean) << ',' << detail::shortest(c.min) << ',' << detail::shortest(c.max) << ",\n";
  }
}

void write_verdicts(std::ostream& out, const std::vector<TrendVerdict>& verdicts) {
  for (const auto& v : verdicts) out << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
}

namespace {

using nlohmann::json;

MacParams mac_from_json(const json& j, MacParams mac) {
  mac.backoff_min = j.value("backoff_min_ms", mac.backoff_min * 1e3) / 1e3;
  mac.backoff_max = j.value("backoff_max_ms", mac.backoff_max * 1e3) / 1e3;
  mac.max_backoffs = j.value("max_backoffs", mac.max_backoffs);
  mac.max_retries = j.value("max_retries", mac.max_retries);
  mac.queue_capacity = j.value("queue_capacity", mac.queue_capacity);
  mac.turnaround = j.value("turnaround_us", mac.turnaround * 1e6) / 1e6;
  mac.header_bytes = j.value("header_bytes", mac.header_bytes);
  mac.bit_rate = j.value("bit_rate", mac.bit_rate);
  return mac;
}

double range_from_json(const json& j) {
  if (auto it = j.find("radio_range_m"); it != j.end()) return it->get<double>();
  return range_preset(j.value("range_preset", std::string("default")));
}

// Cross-checks the documented setup table against the layout the arena
// builder produces from the same numbers.
ArenaShape arena_from_json(const json& j) {
  ArenaShape shape;
  auto setups = j.find("setups");
  if (setups == j.end()) return shape;
  for (const auto& [mode_name, setup] : setups->items()) {
    const auto mode = slice_mode_from_string(mode_name);
    const auto routers = setup.at("border_routers").get<std::size_t>();
    if (mode == SliceMode::non_sliced) {
      if (routers != 1) throw Error(Errc::config, "non-sliced setup must use one border router");
      if (setup.value("topology", std::string("grid")) != "grid")
        throw Error(Errc::config, "non-sliced setup must use a grid topology");
      continue;
    }
    if (routers != 2) throw Error(Errc::config, mode_name + " setup must use two border routers");
    for (const auto& slice : setup.at("slices")) {
      const auto id = slice.at("id").get<std::string>();
      const auto topology = slice.at("topology").get<std::string>();
      const auto nodes = slice.at("nodes").get<std::size_t>();
      if (id == "A" && topology == "linear") {
        shape.corridor = nodes;
        if (slice.contains("channel")) shape.corridor_channel = slice["channel"].get<Channel>();
      } else if (id == "B" && topology == "grid") {
        shape.chairs = nodes;
        if (slice.contains("channel")) shape.chair_channel = slice["channel"].get<Channel>();
      } else {
        throw Error(Errc::config, "arena slices are A (linear) and B (grid); got '" + id + "' (" + topology + ")");
      }
    }
  }
  if (auto it = setups->find("non-sliced"); it != setups->end() && it->contains("network_nodes")) {
    const auto total = it->at("network_nodes").get<std::size_t>();
    if (total != shape.corridor + shape.chairs)
      throw Error(Errc::config, "non-sliced node count " + std::to_string(total) + " differs from slice A + B");
  }
  return shape;
}

}  // namespace

MatrixConfig matrix_from_json(const json& j) {
  try {
    MatrixConfig m;
    const auto& traffic = j.at("traffic");
    m.payload_bytes = traffic.value("payload_bytes", std::size_t{128});
    m.rates = traffic.at("rates").get<std::vector<double>>();
    for (const auto& d : j.at("densities")) m.densities.push_back(density_preset(d.get<std::string>()).level);
    for (const auto& mode : j.at("modes")) m.modes.push_back(slice_mode_from_string(mode.get<std::string>()));
    m.duration = j.value("duration_min", 30.0) * 60.0;
    m.comm_range = range_from_json(j);
    m.arena = arena_from_json(j);
    if (auto it = j.find("mac"); it != j.end()) m.mac = mac_from_json(*it, m.mac);
    const auto seeds = j.value("seeds", std::size_t{5});
    const auto first = j.value("first_seed", std::uint64_t{1});
    for (std::size_t s = 0; s < seeds; ++s) m.seeds.push_back(first + s);
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("malformed scenario config: ") + e.what());
  }
}

ScenarioConfig scenario_from_json(const json& j) {
  try {
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.density = density_preset(j.value("density", std::string("ultra"))).level;
    c.mode = slice_mode_from_string(j.value("mode", std::string("non-sliced")));
    c.comm_range = range_from_json(j);
    if (auto it = j.find("traffic"); it != j.end()) {
      c.traffic.rate_per_min = it->value("rate", c.traffic.rate_per_min);
      c.traffic.payload_bytes = it->value("payload_bytes", c.traffic.payload_bytes);
    }
    c.duration = j.value("duration_min", 30.0) * 60.0;
    c.seed = j.value("seed", std::uint64_t{1});
    c.reactive = j.value("reactive", true);
    c.arena = arena_from_json(j);
    if (auto it = j.find("mac"); it != j.end()) c.mac = mac_from_json(*it, c.mac);
    if (auto it = j.find("plan"); it != j.end()) {
      if (!j.contains("nodes")) throw Error(Errc::config, "a custom plan needs a 'nodes' list");
      Deployment d;
      for (const auto& n : j.at("nodes"))
        d.nodes.push_back({n.at("id").get<NodeId>(),
                           {n.at("x").get<double>(), n.at("y").get<double>()},
                           role_from_string(n.value("role", std::string("sensor"))),
                           n.value("category", std::string())});
      d.plan = plan_from_json(*it);
      c.mode = d.plan.mode;
      c.deployment = std::move(d);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("malformed scenario config: ") + e.what());
  }
}

}  // namespace denis
