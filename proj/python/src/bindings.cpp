// JSON crosses the boundary as text; the Python package parses it.

#include "denis/codet.hpp"
#include "denis/controller.hpp"
#include "denis/error.hpp"
#include "denis/json_io.hpp"
#include "denis/scenario.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using nlohmann::json;
using namespace denis;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::validation, e.what());
  }
}

std::vector<NodeRecord> nodes_from_json(const json& j) {
  std::vector<NodeRecord> out;
  for (const auto& n : j)
    out.push_back({n.at("id").get<NodeId>(),
                   {n.at("x").get<double>(), n.at("y").get<double>()},
                   role_from_string(n.value("role", std::string("sensor"))),
                   n.value("category", std::string())});
  return out;
}

std::string arena(const std::string& density, const std::string& mode) {
  const auto d = build_arena(density_preset(density).level, slice_mode_from_string(mode));
  auto topo = to_json(d.nodes, derive_connectivity(d.nodes, kDefaultRadioRange));
  return json{{"nodes", topo["nodes"]}, {"plan", to_json(d.plan)}}.dump();
}

std::size_t max_neighbors(const std::string& density, double range) {
  const auto d = build_arena(density_preset(density).level, SliceMode::non_sliced);
  std::vector<NodeRecord> sensors;
  for (const auto& n : d.nodes)
    if (n.role == Role::sensor) sensors.push_back(n);
  return max_neighbor_count(derive_connectivity(sensors, range));
}

std::vector<NodeId> disconnected(const std::string& nodes, double range, NodeId target, const std::string& strategy) {
  const auto records = nodes_from_json(parse(nodes));
  const auto g = derive_connectivity(records, range);
  if (!g.contains(target)) throw Error(Errc::lookup, "unknown target " + std::to_string(target));
  return disconnected_nodes(g, target, strategy == "per-node" ? CodetStrategy::per_node_bfs : CodetStrategy::reverse_bfs);
}

std::string run_one(const std::string& config) {
  auto c = scenario_from_json(parse(config));
  c.record_log = parse(config).value("record_log", false);
  const auto r = run_scenario(c);
  auto out = to_json(r.report);
  out["event_log"] = r.event_log;
  return out.dump();
}

std::string run_sweep(const std::string& config, std::size_t workers) {
  auto m = matrix_from_json(parse(config));
  m.workers = workers ? workers : 1;
  std::vector<ResultRow> rows;
  {
    py::gil_scoped_release release;
    rows = run_matrix(m);
  }
  std::ostringstream csv;
  write_results_csv(csv, rows);
  return csv.str();
}

std::string summarize_csv(const std::string& results) {
  std::istringstream in(results);
  const auto s = summarize(read_results_csv(in));
  auto cells = [](const std::vector<CellSummary>& list) {
    json out = json::array();
    for (const auto& c : list) {
      json cell = {{"density", c.density}, {"mode", c.mode}, {"rate", c.rate}, {"slice", c.slice}, {"runs", c.runs}};
      if (c.empty)
        cell["empty"] = true;
      else
        cell.update({{"mean", c.mean}, {"min", c.min}, {"max", c.max}});
      out.push_back(std::move(cell));
    }
    return out;
  };
  json verdicts = json::array();
  for (const auto& v : s.verdicts) verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  return json{{"network", cells(s.network)}, {"slices", cells(s.slices)}, {"verdicts", verdicts}}.dump();
}

std::string outcome_json(const ReconfigurationOutcome& o) {
  json retunes = json::array();
  for (const auto& r : o.retunes) retunes.push_back({{"node", r.node}, {"channel", r.channel}});
  json unreachable = json::object();
  for (const auto& [slice, ids] : o.unreachable) unreachable[slice] = ids;
  return json{{"epoch", o.epoch}, {"rerouted", o.rerouted}, {"unreachable", unreachable}, {"retunes", retunes}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error(m, "DenisError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(e.reason()) + ": " + e.what();
      py::set_error(error, msg.c_str());
    }
  });

  m.def("arena", &arena, py::arg("density"), py::arg("mode"));
  m.def("max_neighbors", &max_neighbors, py::arg("density"), py::arg("range"));
  m.def("range_preset", [](const std::string& name) { return range_preset(name); });
  m.def("disconnected", &disconnected, py::arg("nodes"), py::arg("range"), py::arg("target"),
        py::arg("strategy") = "reverse");
  m.def("run_scenario", &run_one, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("run_matrix", &run_sweep, py::arg("config"), py::arg("workers") = 1);
  m.def("summarize", &summarize_csv, py::arg("results_csv"));

  py::class_<Controller>(m, "Controller")
      .def(py::init([](const std::string& nodes, double range, const std::string& plan) {
             return std::make_unique<Controller>(nodes_from_json(parse(nodes)), range, plan_from_json(parse(plan)));
           }),
           py::arg("nodes"), py::arg("range"), py::arg("plan"))
      .def("topology", [](const Controller& c) { return to_json(c.nodes(), c.graph()).dump(); })
      .def("plan", [](const Controller& c) { return to_json(*c.plan()).dump(); })
      .def("density", [](const Controller& c) { return to_json(c.density()).dump(); })
      .def("flows", [](const Controller& c) { return to_json(c.snapshot()->flows).dump(); })
      .def("set_plan", [](Controller& c, const std::string& plan) { return outcome_json(c.set_plan(plan_from_json(parse(plan)))); })
      .def("apply_delta",
           [](Controller& c, const std::string& delta) { return outcome_json(c.apply_delta(delta_from_json(parse(delta)))); })
      .def("codet_run", [](Controller& c, const std::string& slice, double now) {
        json out = json::array();
        const auto reports = slice.empty() ? c.codet().run(now) : c.codet().run(now, &slice);
        for (const auto& r : reports) out.push_back(to_json(r));
        return out.dump();
      }, py::arg("slice") = "", py::arg("now") = 0.0);
}
