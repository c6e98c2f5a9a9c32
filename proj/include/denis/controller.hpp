#pragma once

#include "denis/codet.hpp"
#include "denis/slicing.hpp"
#include "denis/topology.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace denis {

struct FlowRule {
  NodeId node = 0;
  NodeId match_destination = 0;
  NodeId action_next_hop = 0;
  SliceId slice_id;

  friend bool operator==(const FlowRule&, const FlowRule&) = default;
};

struct Route {
  NodeId source = 0;
  NodeId destination = 0;
  std::vector<NodeId> hops;  // source ... destination
  SliceId slice_id;

  std::size_t hop_count() const noexcept { return hops.empty() ? 0 : hops.size() - 1; }
  friend bool operator==(const Route&, const Route&) = default;
};

/// Per node, rules sorted by destination; at most one rule per destination.
using FlowTables = std::map<NodeId, std::vector<FlowRule>>;

/// Hop distances from `root` to every node that can reach it.
std::map<NodeId, std::size_t> bfs_distances(const ConnectivityGraph& g, NodeId root);

/// The graph that governs routing for `slice` under `plan`'s mode.
const ConnectivityGraph& governing_graph(const SlicePlan& plan, const SliceSpec& slice,
                                         const std::map<SliceId, ConnectivityGraph>& slice_graphs);

/// Minimum-hop route from `source` to its slice's border router inside the
/// slice graph. Among equal-length continuations the lowest next-hop id wins.
/// Throws Error(route_unavailable) with the slice's disconnected set in the
/// message when no path exists.
Route compute_route(const SlicePlan& plan, const std::map<SliceId, ConnectivityGraph>& slice_graphs,
                    NodeId source);

/// One rule per relay per route; later routes overwrite earlier rules for the
/// same (node, destination). Throws Error(consistency) if a hop is not an edge
/// of `g`.
FlowTables install_flows(const ConnectivityGraph& g, std::span<const Route> routes);
void install_flows(FlowTables& tables, const ConnectivityGraph& g, std::span<const Route> routes);

const FlowRule* find_rule(const FlowTables& tables, NodeId node, NodeId destination);

struct RetuneDirective {
  NodeId node = 0;
  Channel channel = kSharedDataChannel;

  friend bool operator==(const RetuneDirective&, const RetuneDirective&) = default;
};

/// Immutable view of the controller's network model at one plan epoch.
struct ControllerSnapshot {
  std::uint64_t epoch = 0;
  SlicePlan plan;
  std::map<SliceId, ConnectivityGraph> slice_graphs;
  std::map<NodeId, Route> routes;  // keyed by source sensor
  FlowTables flows;
  std::map<SliceId, std::vector<NodeId>> unreachable;  // sensors without a route
};

struct ReconfigurationOutcome {
  std::uint64_t epoch = 0;
  std::vector<NodeId> rerouted;  // sources whose route changed, appeared or vanished
  std::map<SliceId, std::vector<NodeId>> unreachable;
  std::vector<RetuneDirective> retunes;
};

/// Control plane: owns the topology model, the live slice plan, routes and
/// flow tables, and the CODET monitor. Plan changes go through the embedded
/// SliceManager; every accepted change recomputes routes and publishes a new
/// snapshot before returning.
class Controller {
public:
  using RetuneListener = std::function<void(std::span<const RetuneDirective>)>;
  using FlowListener = std::function<void(const ControllerSnapshot&)>;

  Controller(std::vector<NodeRecord> nodes, double comm_range, SlicePlan plan);

  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  const std::vector<NodeRecord>& nodes() const noexcept { return nodes_; }
  const ConnectivityGraph& graph() const noexcept { return graph_; }
  double comm_range() const noexcept { return comm_range_; }

  std::shared_ptr<const ControllerSnapshot> snapshot() const;
  std::shared_ptr<const SlicePlan> plan() const { return slices_.snapshot(); }

  /// Replace the whole plan (physical plans get channels auto-filled).
  ReconfigurationOutcome set_plan(SlicePlan plan);
  ReconfigurationOutcome apply_delta(const ReconfigurationDelta& delta);
  ReconfigurationOutcome last_outcome() const;

  /// Reactive lookup for a route miss: next hop from `node` toward
  /// `destination` under the current snapshot.
  std::optional<NodeId> resolve_next_hop(NodeId node, NodeId destination);

  std::map<NodeId, DensityClass> density() const;
  CodetMonitor& codet() noexcept { return *codet_; }

  void on_retune(RetuneListener listener);
  void on_flows(FlowListener listener);

private:
  void rebuild(const ReconfigurationEvent& event);

  std::vector<NodeRecord> nodes_;
  double comm_range_;
  ConnectivityGraph graph_;
  std::set<NodeId> routers_;
  SliceManager slices_;

  std::mutex mutation_mutex_;  // one plan change (and its outcome) at a time
  mutable std::mutex state_mutex_;
  std::shared_ptr<const ControllerSnapshot> state_;
  ReconfigurationOutcome last_outcome_;
  std::vector<RetuneListener> retune_listeners_;
  std::vector<FlowListener> flow_listeners_;
  std::unique_ptr<CodetMonitor> codet_;
};

/// Proactive state for a plan: routes for every sensor that has one.
ControllerSnapshot build_snapshot(const ConnectivityGraph& g, const SlicePlan& plan,
                                  const std::set<NodeId>& border_routers);

}  // namespace denis
