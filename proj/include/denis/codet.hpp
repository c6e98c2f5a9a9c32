#pragma once

#include "denis/slicing.hpp"
#include "denis/topology.hpp"

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace denis {

/// Connectivity of one slice towards its target (normally the border router).
struct ConnectivityReport {
  SliceId slice_id;
  NodeId target = 0;
  std::vector<NodeId> disconnected;  // ascending ids
  double checked_at = 0.0;           // seconds, simulation or wall clock

  bool fully_connected() const noexcept { return disconnected.empty(); }
  friend bool operator==(const ConnectivityReport&, const ConnectivityReport&) = default;
};

/// Breadth-first search from `start`; true iff `target` is reachable.
/// Throws Error(lookup) if either id is absent.
bool path_exists(const ConnectivityGraph& g, NodeId start, NodeId target);

enum class CodetStrategy {
  reverse_bfs,   // one search from the target
  per_node_bfs,  // one search per node towards the target
};

/// Nodes of `g` (other than `target`) with no path to `target`.
std::vector<NodeId> disconnected_nodes(const ConnectivityGraph& g, NodeId target,
                                       CodetStrategy strategy = CodetStrategy::reverse_bfs);

ConnectivityReport detect(const ConnectivityGraph& g, NodeId target, SliceId slice_id = {},
                          double checked_at = 0.0,
                          CodetStrategy strategy = CodetStrategy::reverse_bfs);

/// Per-slice CODET runs and the periodic schedule. Reports are kept in a
/// bounded ring per slice. Thread-safe.
class CodetMonitor {
public:
  struct Target {
    ConnectivityGraph graph;
    NodeId target = 0;
  };
  using SliceSource = std::function<std::map<SliceId, Target>()>;
  using Notifier = std::function<void(const ConnectivityReport&)>;

  static constexpr std::size_t kRingCapacity = 100;
  static constexpr double kDefaultInterval = 600.0;  // 10 min

  /// `source` must return a consistent snapshot of every slice graph.
  explicit CodetMonitor(SliceSource source, double interval = kDefaultInterval);

  double interval() const;
  void set_interval(double seconds);
  /// Invoked for every report with a non-empty disconnected list.
  void on_disconnection(Notifier notifier);

  /// Runs every slice (or one) now and records the reports.
  std::vector<ConnectivityReport> run(double now, const SliceId* only = nullptr);
  /// Emits every scheduled check with due time in (last_due, now].
  std::vector<ConnectivityReport> advance_to(double now);

  std::vector<ConnectivityReport> reports(const SliceId* only = nullptr) const;

private:
  std::vector<ConnectivityReport> check_locked(double at, const SliceId* only);

  mutable std::mutex mutex_;
  SliceSource source_;
  double interval_;
  double next_due_;
  std::map<SliceId, std::deque<ConnectivityReport>> ring_;
  std::vector<Notifier> notifiers_;
};

/// Fixed-interval schedule over a run of `duration` seconds, starting at t=0:
/// one report per slice at interval, 2*interval, ... <= duration.
std::vector<ConnectivityReport> schedule_checks(const std::map<SliceId, CodetMonitor::Target>& slices,
                                                double interval, double duration);

}  // namespace denis
