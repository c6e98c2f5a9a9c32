#include "denis/json_io.hpp"

#include "denis/error.hpp"

namespace denis {

using nlohmann::json;

json to_json(const SlicePlan& plan) {
  json slices = json::array();
  for (const auto& s : plan.slices) {
    json entry{{"id", s.id},
               {"members", std::vector<NodeId>(s.members.begin(), s.members.end())},
               {"border_router", s.border_router}};
    entry["channel"] = s.channel ? json(*s.channel) : json(nullptr);
    slices.push_back(std::move(entry));
  }
  return {{"mode", to_string(plan.mode)}, {"slices", std::move(slices)}, {"default_slice", plan.default_slice}};
}

SlicePlan plan_from_json(const json& j) {
  try {
    SlicePlan plan;
    plan.mode = slice_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& entry : j.at("slices")) {
      SliceSpec s;
      s.id = entry.at("id").get<std::string>();
      s.border_router = entry.at("border_router").get<NodeId>();
      if (auto it = entry.find("members"); it != entry.end())
        for (const auto& m : *it) s.members.insert(m.get<NodeId>());
      if (auto it = entry.find("channel"); it != entry.end() && !it->is_null()) s.channel = it->get<Channel>();
      plan.slices.push_back(std::move(s));
    }
    plan.default_slice = j.value("default_slice", plan.slices.empty() ? SliceId{} : plan.slices.front().id);
    return plan;
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("malformed plan: ") + e.what());
  }
}

ReconfigurationDelta delta_from_json(const json& j) {
  try {
    ReconfigurationDelta delta;
    if (auto it = j.find("moves"); it != j.end())
      for (const auto& m : *it) delta.moves.push_back({m.at("node").get<NodeId>(), m.at("to_slice").get<std::string>()});
    if (auto it = j.find("retunes"); it != j.end())
      for (const auto& r : *it) delta.retunes.push_back({r.at("slice").get<std::string>(), r.at("channel").get<Channel>()});
    return delta;
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("malformed delta: ") + e.what());
  }
}

json to_json(const PdrReport& report) {
  json per_slice = json::object();
  for (const auto& [id, c] : report.per_slice) {
    per_slice[id] = {{"sent", c.sent}, {"received", c.received}, {"pdr", c.undefined() ? json(nullptr) : json(c.pdr())}};
  }
  return {{"sent", report.sent},
          {"received", report.received},
          {"pdr", report.pdr_undefined ? json(nullptr) : json(report.pdr)},
          {"pdr_undefined", report.pdr_undefined},
          {"per_slice", std::move(per_slice)},
          {"drops",
           {{"collision", report.dropped_collision},
            {"retry", report.dropped_retry},
            {"queue", report.dropped_queue}}},
          {"in_flight", report.in_flight}};
}

json to_json(const ConnectivityReport& report) {
  return {{"slice", report.slice_id},
          {"target", report.target},
          {"disconnected", report.disconnected},
          {"fully_connected", report.fully_connected()},
          {"checked_at", report.checked_at}};
}

json to_json(const std::map<NodeId, DensityClass>& density) {
  json out = json::object();
  for (const auto& [id, c] : density)
    out[std::to_string(id)] = {{"tier", to_string(c.tier)}, {"percentile", c.adjacency_percentile}};
  return out;
}

json to_json(const std::vector<NodeRecord>& nodes, const ConnectivityGraph& g) {
  json jn = json::array();
  for (const auto& n : nodes)
    jn.push_back({{"id", n.id},
                  {"x", n.position.x},
                  {"y", n.position.y},
                  {"role", to_string(n.role)},
                  {"category", n.category},
                  {"degree", g.contains(n.id) ? g.degree(n.id) : 0}});
  json je = json::array();
  for (const auto& [u, v] : g.edges()) je.push_back({u, v});
  return {{"nodes", std::move(jn)}, {"edges", std::move(je)}};
}

json to_json(const FlowTables& flows) {
  json out = json::object();
  for (const auto& [node, rules] : flows) {
    json list = json::array();
    for (const auto& r : rules)
      list.push_back({{"match_destination", r.match_destination},
                      {"action_next_hop", r.action_next_hop},
                      {"slice", r.slice_id}});
    out[std::to_string(node)] = std::move(list);
  }
  return out;
}

}  // namespace denis
