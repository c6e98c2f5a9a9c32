#include "denis/codet.hpp"

#include "denis/error.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>

namespace denis {

namespace {

// Dense re-indexing of a graph so searches can use flat visited arrays.
struct IndexedGraph {
  std::vector<NodeId> ids;
  std::unordered_map<NodeId, std::size_t> index;
  std::vector<std::vector<std::size_t>> adjacency;

  explicit IndexedGraph(const ConnectivityGraph& g) {
    ids = g.nodes();
    index.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
    adjacency.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (NodeId n : g.neighbors(ids[i])) adjacency[i].push_back(index.at(n));
  }

  std::size_t at(NodeId id) const {
    auto it = index.find(id);
    if (it == index.end()) throw Error(Errc::lookup, "node " + std::to_string(id) + " is not in the graph");
    return it->second;
  }
};

// The search of Algorithm-style CODET: pop, test for target, expand once.
bool bfs_reaches(const IndexedGraph& g, std::size_t start, std::size_t target,
                 std::vector<char>& visited) {
  std::fill(visited.begin(), visited.end(), 0);
  std::queue<std::size_t> queue;
  queue.push(start);
  while (!queue.empty()) {
    const auto current = queue.front();
    queue.pop();
    if (current == target) return true;
    if (visited[current]) continue;
    visited[current] = 1;
    for (auto n : g.adjacency[current])
      if (!visited[n]) queue.push(n);
  }
  return false;
}

}  // namespace

bool path_exists(const ConnectivityGraph& g, NodeId start, NodeId target) {
  const IndexedGraph indexed(g);
  std::vector<char> visited(indexed.ids.size());
  return bfs_reaches(indexed, indexed.at(start), indexed.at(target), visited);
}

std::vector<NodeId> disconnected_nodes(const ConnectivityGraph& g, NodeId target,
                                       CodetStrategy strategy) {
  const IndexedGraph indexed(g);
  const auto t = indexed.at(target);
  std::vector<NodeId> out;

  if (strategy == CodetStrategy::per_node_bfs) {
    std::vector<char> visited(indexed.ids.size());
    for (std::size_t n = 0; n < indexed.ids.size(); ++n)
      if (n != t && !bfs_reaches(indexed, n, t, visited)) out.push_back(indexed.ids[n]);
    return out;
  }

  std::vector<char> reached(indexed.ids.size(), 0);
  std::queue<std::size_t> queue;
  queue.push(t);
  reached[t] = 1;
  while (!queue.empty()) {
    const auto current = queue.front();
    queue.pop();
    for (auto n : indexed.adjacency[current]) {
      if (reached[n]) continue;
      reached[n] = 1;
      queue.push(n);
    }
  }
  for (std::size_t n = 0; n < indexed.ids.size(); ++n)
    if (!reached[n]) out.push_back(indexed.ids[n]);
  return out;
}

ConnectivityReport detect(const ConnectivityGraph& g, NodeId target, SliceId slice_id,
                          double checked_at, CodetStrategy strategy) {
  return {std::move(slice_id), target, disconnected_nodes(g, target, strategy), checked_at};
}

CodetMonitor::CodetMonitor(SliceSource source, double interval)
    : source_(std::move(source)), interval_(interval), next_due_(interval) {
  if (!(interval > 0.0)) throw Error(Errc::config, "CODET interval must be positive");
}

double CodetMonitor::interval() const {
  std::lock_guard lock(mutex_);
  return interval_;
}

void CodetMonitor::set_interval(double seconds) {
  if (!(seconds > 0.0)) throw Error(Errc::config, "CODET interval must be positive");
  std::lock_guard lock(mutex_);
  next_due_ = next_due_ - interval_ + seconds;
  interval_ = seconds;
}

void CodetMonitor::on_disconnection(Notifier notifier) {
  std::lock_guard lock(mutex_);
  notifiers_.push_back(std::move(notifier));
}

std::vector<ConnectivityReport> CodetMonitor::run(double now, const SliceId* only) {
  std::lock_guard lock(mutex_);
  return check_locked(now, only);
}

std::vector<ConnectivityReport> CodetMonitor::advance_to(double now) {
  std::lock_guard lock(mutex_);
  std::vector<ConnectivityReport> out;
  // Small epsilon so accumulated interval sums still hit boundaries exactly.
  while (next_due_ <= now + 1e-9) {
    auto batch = check_locked(next_due_, nullptr);
    out.insert(out.end(), batch.begin(), batch.end());
    next_due_ += interval_;
  }
  return out;
}

std::vector<ConnectivityReport> CodetMonitor::reports(const SliceId* only) const {
  std::lock_guard lock(mutex_);
  std::vector<ConnectivityReport> out;
  for (const auto& [id, ring] : ring_)
    if (!only || *only == id) out.insert(out.end(), ring.begin(), ring.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.checked_at < b.checked_at; });
  return out;
}

std::vector<ConnectivityReport> CodetMonitor::check_locked(double at, const SliceId* only) {
  const auto slices = source_();
  if (only && !slices.count(*only)) throw Error(Errc::lookup, "unknown slice '" + *only + "'");
  std::vector<ConnectivityReport> out;
  for (const auto& [id, target] : slices) {
    if (only && *only != id) continue;
    auto report = detect(target.graph, target.target, id, at);
    auto& ring = ring_[id];
    ring.push_back(report);
    if (ring.size() > kRingCapacity) ring.pop_front();
    if (!report.fully_connected())
      for (const auto& notify : notifiers_) notify(report);
    out.push_back(std::move(report));
  }
  return out;
}

std::vector<ConnectivityReport> schedule_checks(const std::map<SliceId, CodetMonitor::Target>& slices,
                                                double interval, double duration) {
  CodetMonitor monitor([&] { return slices; }, interval);
  return monitor.advance_to(duration);
}

}  // namespace denis
