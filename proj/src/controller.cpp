#include "denis/controller.hpp"

#include "denis/error.hpp"

#include <algorithm>
#include <iostream>
#include <queue>

namespace denis {

std::map<NodeId, std::size_t> bfs_distances(const ConnectivityGraph& g, NodeId root) {
  std::map<NodeId, std::size_t> dist;
  if (!g.contains(root)) return dist;
  std::queue<NodeId> queue;
  dist[root] = 0;
  queue.push(root);
  while (!queue.empty()) {
    const NodeId current = queue.front();
    queue.pop();
    const auto d = dist[current];
    for (NodeId n : g.neighbors(current))
      if (dist.emplace(n, d + 1).second) queue.push(n);
  }
  return dist;
}

const ConnectivityGraph& governing_graph(const SlicePlan& plan, const SliceSpec& slice,
                                         const std::map<SliceId, ConnectivityGraph>& slice_graphs) {
  (void)plan;  // non-sliced plans have one slice whose graph is G itself
  auto it = slice_graphs.find(slice.id);
  if (it == slice_graphs.end()) throw Error(Errc::lookup, "no graph for slice '" + slice.id + "'");
  return it->second;
}

namespace {

std::string list_ids(const std::vector<NodeId>& ids) {
  std::string out;
  for (NodeId id : ids) out += (out.empty() ? "" : ",") + std::to_string(id);
  return out;
}

// Walks down the distance field, always taking the lowest-id neighbor one
// hop closer to the root.
Route route_along(const ConnectivityGraph& g, const std::map<NodeId, std::size_t>& dist,
                  const SliceSpec& slice, NodeId source) {
  Route route{source, slice.border_router, {source}, slice.id};
  NodeId current = source;
  auto d = dist.at(source);
  while (d > 0) {
    for (NodeId n : g.neighbors(current)) {
      auto it = dist.find(n);
      if (it != dist.end() && it->second == d - 1) {
        current = n;
        break;
      }
    }
    route.hops.push_back(current);
    --d;
  }
  return route;
}

[[noreturn]] void throw_unreachable(const ConnectivityGraph& g, const SliceSpec& slice, NodeId source) {
  const auto report = detect(g, slice.border_router, slice.id);
  throw Error(Errc::route_unavailable,
              "no path from node " + std::to_string(source) + " to border router " +
                  std::to_string(slice.border_router) + " in slice '" + slice.id +
                  "'; disconnected: [" + list_ids(report.disconnected) + "]");
}

}  // namespace

Route compute_route(const SlicePlan& plan, const std::map<SliceId, ConnectivityGraph>& slice_graphs,
                    NodeId source) {
  const auto* slice = plan.slice_of(source);
  if (!slice) throw Error(Errc::lookup, "node " + std::to_string(source) + " belongs to no slice");
  if (slice->border_router == source)
    throw Error(Errc::config, "node " + std::to_string(source) + " is a border router, not a source");
  const auto& g = governing_graph(plan, *slice, slice_graphs);
  const auto dist = bfs_distances(g, slice->border_router);
  if (!dist.count(source)) throw_unreachable(g, *slice, source);
  return route_along(g, dist, *slice, source);
}

void install_flows(FlowTables& tables, const ConnectivityGraph& g, std::span<const Route> routes) {
  for (const auto& route : routes) {
    for (std::size_t i = 0; i + 1 < route.hops.size(); ++i) {
      const NodeId node = route.hops[i];
      const NodeId next = route.hops[i + 1];
      if (!g.has_edge(node, next))
        throw Error(Errc::consistency, "rule at node " + std::to_string(node) + " points to non-neighbor " +
                                           std::to_string(next));
      FlowRule rule{node, route.destination, next, route.slice_id};
      auto& list = tables[node];
      auto it = std::lower_bound(list.begin(), list.end(), route.destination,
                                 [](const FlowRule& r, NodeId d) { return r.match_destination < d; });
      if (it != list.end() && it->match_destination == route.destination)
        *it = std::move(rule);
      else
        list.insert(it, std::move(rule));
    }
  }
}

FlowTables install_flows(const ConnectivityGraph& g, std::span<const Route> routes) {
  FlowTables tables;
  install_flows(tables, g, routes);
  return tables;
}

const FlowRule* find_rule(const FlowTables& tables, NodeId node, NodeId destination) {
  auto it = tables.find(node);
  if (it == tables.end()) return nullptr;
  for (const auto& rule : it->second)
    if (rule.match_destination == destination) return &rule;
  return nullptr;
}

ControllerSnapshot build_snapshot(const ConnectivityGraph& g, const SlicePlan& plan,
                                  const std::set<NodeId>& border_routers) {
  ControllerSnapshot snap;
  snap.plan = plan;
  snap.slice_graphs = partition(g, plan);
  std::vector<Route> routes;
  for (const auto& slice : plan.slices) {
    const auto& sg = snap.slice_graphs.at(slice.id);
    const auto dist = bfs_distances(sg, slice.border_router);
    for (NodeId n : slice.members) {
      if (n == slice.border_router || border_routers.count(n)) continue;
      if (!dist.count(n)) {
        snap.unreachable[slice.id].push_back(n);
        continue;
      }
      routes.push_back(route_along(sg, dist, slice, n));
    }
  }
  install_flows(snap.flows, g, routes);
  for (auto& r : routes) snap.routes.emplace(r.source, std::move(r));
  return snap;
}

Controller::Controller(std::vector<NodeRecord> nodes, double comm_range, SlicePlan plan)
    : nodes_(std::move(nodes)),
      comm_range_(comm_range),
      graph_(derive_connectivity(nodes_, comm_range)),
      routers_([&] {
        std::set<NodeId> out;
        for (const auto& n : nodes_)
          if (n.is_border_router()) out.insert(n.id);
        return out;
      }()),
      slices_(plan.mode == SliceMode::physical ? assign_channels(std::move(plan)) : std::move(plan),
              [&] {
                std::set<NodeId> ids;
                for (const auto& n : nodes_) ids.insert(n.id);
                return ids;
              }()) {
  auto snap = std::make_shared<ControllerSnapshot>(build_snapshot(graph_, *slices_.snapshot(), routers_));
  snap->epoch = slices_.epoch();
  last_outcome_.unreachable = snap->unreachable;
  state_ = std::move(snap);
  slices_.subscribe([this](const ReconfigurationEvent& e) { rebuild(e); });
  codet_ = std::make_unique<CodetMonitor>([this] {
    const auto snap = snapshot();
    std::map<SliceId, CodetMonitor::Target> out;
    for (const auto& s : snap->plan.slices)
      out.emplace(s.id, CodetMonitor::Target{snap->slice_graphs.at(s.id), s.border_router});
    return out;
  });
  codet_->on_disconnection([](const ConnectivityReport& r) {
    std::string ids;
    for (auto id : r.disconnected) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    std::clog << "codet: slice " << r.slice_id << " at t=" << r.checked_at << ": no path to " << r.target
              << " from " << ids << '\n';
  });
}

std::shared_ptr<const ControllerSnapshot> Controller::snapshot() const {
  std::lock_guard lock(state_mutex_);
  return state_;
}

ReconfigurationOutcome Controller::set_plan(SlicePlan plan) {
  if (plan.mode == SliceMode::physical) plan = assign_channels(std::move(plan));
  std::lock_guard lock(mutation_mutex_);
  slices_.replace(std::move(plan));
  return last_outcome();
}

ReconfigurationOutcome Controller::apply_delta(const ReconfigurationDelta& delta) {
  std::lock_guard lock(mutation_mutex_);
  slices_.apply(delta);
  return last_outcome();
}

ReconfigurationOutcome Controller::last_outcome() const {
  std::lock_guard lock(state_mutex_);
  return last_outcome_;
}

void Controller::rebuild(const ReconfigurationEvent& event) {
  const auto previous = snapshot();
  auto next = std::make_shared<ControllerSnapshot>(build_snapshot(graph_, event.current, routers_));
  next->epoch = event.epoch;

  ReconfigurationOutcome outcome;
  outcome.epoch = event.epoch;
  outcome.unreachable = next->unreachable;
  for (const auto& n : nodes_) {
    auto before = previous->routes.find(n.id);
    auto after = next->routes.find(n.id);
    const bool had = before != previous->routes.end();
    const bool has = after != next->routes.end();
    if (had != has || (had && has && before->second != after->second)) outcome.rerouted.push_back(n.id);
  }
  // Channel directives for every node whose effective channel changed.
  for (const auto& n : nodes_) {
    const auto* old_slice = event.previous.slice_of(n.id);
    const auto* new_slice = event.current.slice_of(n.id);
    if (!new_slice) continue;
    const Channel now = event.current.channel_of(*new_slice);
    const Channel before = old_slice ? event.previous.channel_of(*old_slice) : kSharedDataChannel;
    if (now != before) outcome.retunes.push_back({n.id, now});
  }

  std::vector<RetuneListener> retune_listeners;
  std::vector<FlowListener> flow_listeners;
  {
    std::lock_guard lock(state_mutex_);
    state_ = next;
    last_outcome_ = outcome;
    retune_listeners = retune_listeners_;
    flow_listeners = flow_listeners_;
  }
  if (!outcome.retunes.empty())
    for (const auto& l : retune_listeners) l(outcome.retunes);
  for (const auto& l : flow_listeners) l(*next);
}

std::optional<NodeId> Controller::resolve_next_hop(NodeId node, NodeId destination) {
  const auto snap = snapshot();
  if (const auto* rule = find_rule(snap->flows, node, destination)) return rule->action_next_hop;
  const auto* slice = snap->plan.slice_of(node);
  if (!slice || slice->border_router != destination) return std::nullopt;
  try {
    const auto route = compute_route(snap->plan, snap->slice_graphs, node);
    return route.hops.size() > 1 ? std::optional<NodeId>(route.hops[1]) : std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::map<NodeId, DensityClass> Controller::density() const { return classify_density(graph_, routers_); }

void Controller::on_retune(RetuneListener listener) {
  std::lock_guard lock(state_mutex_);
  retune_listeners_.push_back(std::move(listener));
}

void Controller::on_flows(FlowListener listener) {
  std::lock_guard lock(state_mutex_);
  flow_listeners_.push_back(std::move(listener));
}

}  // namespace denis
