#include "denis/topology.hpp"

#include "denis/error.hpp"
#include "format.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace denis {

double distance(const Position& a, const Position& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view to_string(Role role) noexcept {
  return role == Role::border_router ? "border-router" : "sensor";
}

Role role_from_string(std::string_view text) {
  if (text == "sensor") return Role::sensor;
  if (text == "border-router") return Role::border_router;
  throw Error(Errc::config, "unknown node role '" + std::string(text) + "'");
}

namespace {

void check_layout_args(std::size_t count, double spacing) {
  if (count == 0) throw Error(Errc::config, "node count must be at least 1");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw Error(Errc::config, "spacing must be a positive finite distance");
}

}  // namespace

std::vector<NodeRecord> build_grid(std::size_t count, double spacing, Position origin,
                                   NodeId first_id, std::string category) {
  check_layout_args(count, spacing);
  const auto columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  std::vector<NodeRecord> nodes;
  nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto row = i / columns;
    const auto col = i % columns;
    nodes.push_back({first_id + static_cast<NodeId>(i),
                     {origin.x + static_cast<double>(col) * spacing,
                      origin.y + static_cast<double>(row) * spacing},
                     Role::sensor,
                     category});
  }
  return nodes;
}

std::vector<NodeRecord> build_linear(std::size_t count, double spacing, Position origin, Axis axis,
                                     NodeId first_id, std::string category) {
  check_layout_args(count, spacing);
  std::vector<NodeRecord> nodes;
  nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double offset = static_cast<double>(i) * spacing;
    Position p = origin;
    (axis == Axis::x ? p.x : p.y) += offset;
    nodes.push_back({first_id + static_cast<NodeId>(i), p, Role::sensor, category});
  }
  return nodes;
}

void ConnectivityGraph::add_node(NodeId id) { adjacency_.try_emplace(id); }

void ConnectivityGraph::add_edge(NodeId u, NodeId v) {
  if (u == v) return;
  auto insert_sorted = [](std::vector<NodeId>& list, NodeId id) {
    auto it = std::lower_bound(list.begin(), list.end(), id);
    if (it == list.end() || *it != id) list.insert(it, id);
  };
  insert_sorted(adjacency_[u], v);
  insert_sorted(adjacency_[v], u);
}

void ConnectivityGraph::remove_node(NodeId id) {
  auto it = adjacency_.find(id);
  if (it == adjacency_.end()) return;
  for (NodeId n : it->second) {
    auto& list = adjacency_[n];
    list.erase(std::remove(list.begin(), list.end(), id), list.end());
  }
  adjacency_.erase(it);
}

bool ConnectivityGraph::has_edge(NodeId u, NodeId v) const {
  auto it = adjacency_.find(u);
  if (it == adjacency_.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), v);
}

const std::vector<NodeId>& ConnectivityGraph::neighbors(NodeId id) const {
  auto it = adjacency_.find(id);
  if (it == adjacency_.end())
    throw Error(Errc::lookup, "node " + std::to_string(id) + " is not in the graph");
  return it->second;
}

std::size_t ConnectivityGraph::edge_count() const noexcept {
  std::size_t twice = 0;
  for (const auto& [id, list] : adjacency_) twice += list.size();
  return twice / 2;
}

std::vector<NodeId> ConnectivityGraph::nodes() const {
  std::vector<NodeId> out;
  out.reserve(adjacency_.size());
  for (const auto& [id, list] : adjacency_) out.push_back(id);
  return out;
}

std::vector<std::pair<NodeId, NodeId>> ConnectivityGraph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& [u, list] : adjacency_)
    for (NodeId v : list)
      if (u < v) out.emplace_back(u, v);
  return out;
}

ConnectivityGraph derive_connectivity(std::span<const NodeRecord> nodes, double comm_range) {
  if (!(comm_range > 0.0)) throw Error(Errc::config, "communication range must be positive");
  ConnectivityGraph g;
  for (const auto& n : nodes) g.add_node(n.id);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      if (nodes[i].id != nodes[j].id && distance(nodes[i].position, nodes[j].position) <= comm_range)
        g.add_edge(nodes[i].id, nodes[j].id);
  return g;
}

std::size_t max_neighbor_count(const ConnectivityGraph& g) {
  std::size_t best = 0;
  for (const auto& [id, list] : g.adjacency()) best = std::max(best, list.size());
  return best;
}

namespace {

constexpr std::array<DensityScenario, 5> kPresets{{
    {DensityLevel::ultra, "ultra", 1.0, 10.0, 10.0, 96},
    {DensityLevel::extra, "extra", 2.0, 20.0, 20.0, 69},
    {DensityLevel::high, "high", 3.0, 30.0, 30.0, 36},
    {DensityLevel::dense, "dense", 4.0, 40.0, 40.0, 20},
    {DensityLevel::medium, "medium", 4.5, 45.0, 45.0, 12},
}};

}  // namespace

std::span<const DensityScenario> density_presets() noexcept { return kPresets; }

const DensityScenario& density_preset(DensityLevel level) noexcept {
  return kPresets[static_cast<std::size_t>(level)];
}

const DensityScenario& density_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (p.name == name) return p;
  throw Error(Errc::config, "unknown density preset '" + std::string(name) + "'");
}

std::string_view to_string(DensityLevel level) noexcept { return density_preset(level).name; }

double range_preset(std::string_view name) {
  if (name == "default") return kDefaultRadioRange;
  if (name == "table1-calibrated") return kCalibratedRadioRange;
  throw Error(Errc::config, "unknown range preset '" + std::string(name) + "'");
}

void write_topology(std::ostream& out, std::span<const NodeRecord> nodes) {
  for (const auto& n : nodes) {
    out << "node " << n.id << ' ' << detail::shortest(n.position.x) << ' '
        << detail::shortest(n.position.y) << ' '
        << to_string(n.role) << ' ' << (n.category.empty() ? "-" : n.category) << '\n';
  }
}

std::vector<NodeRecord> read_topology(std::istream& in) {
  std::vector<NodeRecord> nodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag) || tag.front() == '#') continue;
    NodeRecord n;
    std::string role;
    if (tag != "node" || !(fields >> n.id >> n.position.x >> n.position.y >> role >> n.category))
      throw Error(Errc::config, "malformed topology line " + std::to_string(line_no));
    n.role = role_from_string(role);
    if (n.category == "-") n.category.clear();
    nodes.push_back(std::move(n));
  }
  return nodes;
}

}  // namespace denis
