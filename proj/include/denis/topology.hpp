#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace denis {

using NodeId = std::uint32_t;

struct Position {
  double x = 0.0;  // meters
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

double distance(const Position& a, const Position& b) noexcept;

enum class Role { sensor, border_router };

std::string_view to_string(Role role) noexcept;
Role role_from_string(std::string_view text);

struct NodeRecord {
  NodeId id = 0;
  Position position;
  Role role = Role::sensor;
  std::string category;

  bool is_border_router() const noexcept { return role == Role::border_router; }
  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

enum class Axis { x, y };

/// Near-square row-major grid: columns = ceil(sqrt(count)), rows filled
/// bottom-up, last row possibly partial. Ids run first_id, first_id+1, ...
std::vector<NodeRecord> build_grid(std::size_t count, double spacing, Position origin,
                                   NodeId first_id = 0, std::string category = "grid");

std::vector<NodeRecord> build_linear(std::size_t count, double spacing, Position origin,
                                     Axis axis = Axis::x, NodeId first_id = 0,
                                     std::string category = "linear");

/// Undirected simple graph over node ids. Adjacency lists are kept sorted so
/// iteration order (and everything derived from it) is deterministic.
class ConnectivityGraph {
public:
  ConnectivityGraph() = default;

  void add_node(NodeId id);
  /// Adds the undirected edge; ignores self-loops and duplicates.
  void add_edge(NodeId u, NodeId v);
  void remove_node(NodeId id);

  bool contains(NodeId id) const { return adjacency_.count(id) != 0; }
  bool has_edge(NodeId u, NodeId v) const;
  /// Throws Error(lookup) for unknown ids.
  const std::vector<NodeId>& neighbors(NodeId id) const;
  std::size_t degree(NodeId id) const { return neighbors(id).size(); }

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t edge_count() const noexcept;
  std::vector<NodeId> nodes() const;
  /// Every edge once, as (min, max), sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  const std::map<NodeId, std::vector<NodeId>>& adjacency() const noexcept { return adjacency_; }

  friend bool operator==(const ConnectivityGraph&, const ConnectivityGraph&) = default;

private:
  std::map<NodeId, std::vector<NodeId>> adjacency_;
};

/// Unit-disk connectivity: edge iff 0 < d(u, v) <= comm_range (u != v).
ConnectivityGraph derive_connectivity(std::span<const NodeRecord> nodes, double comm_range);

std::size_t max_neighbor_count(const ConnectivityGraph& g);

enum class DensityLevel { ultra, extra, high, dense, medium };

struct DensityScenario {
  DensityLevel level;
  std::string_view name;
  double spacing;            // m
  double area_width;         // m
  double area_height;        // m
  std::size_t expected_max_neighbors;
};

/// The five deployment presets, densest first.
std::span<const DensityScenario> density_presets() noexcept;
const DensityScenario& density_preset(DensityLevel level) noexcept;
const DensityScenario& density_preset(std::string_view name);
std::string_view to_string(DensityLevel level) noexcept;

/// Named communication-range presets: "default" (25 m radio range) and
/// "table1-calibrated" (10 m, close to the tabulated neighbor counts except "extra").
inline constexpr double kDefaultRadioRange = 25.0;
inline constexpr double kCalibratedRadioRange = 10.0;
double range_preset(std::string_view name);

/// Line format: `node <id> <x> <y> <role> <category>`. Blank lines and lines
/// starting with '#' are ignored on input.
void write_topology(std::ostream& out, std::span<const NodeRecord> nodes);
std::vector<NodeRecord> read_topology(std::istream& in);

}  // namespace denis
