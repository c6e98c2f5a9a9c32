#pragma once

#include "denis/topology.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace denis {

using SliceId = std::string;
using Channel = int;

// IEEE 802.15.4, 2.4 GHz band.
inline constexpr Channel kMinChannel = 11;
inline constexpr Channel kMaxChannel = 26;
inline constexpr std::size_t kMaxPhysicalSlices = kMaxChannel - kMinChannel + 1;
/// Channel shared by every node when the plan is not physically sliced.
inline constexpr Channel kSharedDataChannel = 26;

enum class SliceMode { non_sliced, logical, physical };

std::string_view to_string(SliceMode mode) noexcept;
SliceMode slice_mode_from_string(std::string_view text);

struct SliceSpec {
  SliceId id;
  std::set<NodeId> members;  // includes border_router once normalized
  std::optional<Channel> channel;
  NodeId border_router = 0;

  friend bool operator==(const SliceSpec&, const SliceSpec&) = default;
};

struct SlicePlan {
  SliceMode mode = SliceMode::non_sliced;
  std::vector<SliceSpec> slices;
  SliceId default_slice;

  const SliceSpec* find(const SliceId& id) const;
  SliceSpec* find(const SliceId& id);
  /// The slice containing `node`, or nullptr.
  const SliceSpec* slice_of(NodeId node) const;
  /// Radio channel a slice transmits on under this plan.
  Channel channel_of(const SliceSpec& slice) const;
  std::set<NodeId> border_routers() const;

  friend bool operator==(const SlicePlan&, const SlicePlan&) = default;
};

/// Checks every plan invariant except coverage of the node census.
/// Capacity is checked before channel assignments so an oversized physical
/// plan always reports slice-capacity.
void validate_plan(const SlicePlan& plan);

/// Puts every node of `all_nodes` that no slice claims into the default
/// slice and makes each border router a member of its slice. Idempotent.
SlicePlan normalize_plan(SlicePlan plan, const std::set<NodeId>& all_nodes);

/// Induced sub-graph of `g` on each slice's members plus its border router.
std::map<SliceId, ConnectivityGraph> partition(const ConnectivityGraph& g, const SlicePlan& plan);

/// Physical mode only. Requests (and channels already present on the plan)
/// are honored; the rest get the lowest free channels in ascending order.
SlicePlan assign_channels(SlicePlan plan, const std::map<SliceId, Channel>& requested = {});

// Adjacency-load tiers, ordered low to high.
enum class DensityTier { green, yellow, amber, red };

std::string_view to_string(DensityTier tier) noexcept;

struct DensityClass {
  DensityTier tier = DensityTier::green;
  double adjacency_percentile = 0.0;

  friend bool operator==(const DensityClass&, const DensityClass&) = default;
};

/// green < 0.40 <= yellow < 0.70 <= amber < 0.90 <= red
DensityTier tier_for_percentile(double percentile) noexcept;

/// Percentile rank of each node's degree among the classified nodes: the
/// fraction of the other nodes with strictly smaller degree (ties rank low).
/// Nodes in `excluded` (border routers) are neither classified nor counted.
std::map<NodeId, DensityClass> classify_density(const ConnectivityGraph& g,
                                                const std::set<NodeId>& excluded = {});

struct ReconfigurationDelta {
  struct Move {
    NodeId node = 0;
    SliceId to_slice;
  };
  struct Retune {
    SliceId slice;
    Channel channel = kMinChannel;
  };
  std::vector<Move> moves;
  std::vector<Retune> retunes;
};

struct ReconfigurationEvent {
  std::uint64_t epoch = 0;
  SlicePlan previous;
  SlicePlan current;
  std::vector<NodeId> moved_nodes;      // sorted
  std::vector<SliceId> retuned_slices;  // slices whose channel changed
  bool replaced = false;                // whole plan swapped (PUT /plan)
};

/// Applies the delta to a copy of `plan`. Any invariant violation throws and
/// leaves `plan` untouched.
SlicePlan apply_reconfiguration(const SlicePlan& plan, const ReconfigurationDelta& change,
                                const std::set<NodeId>& all_nodes);

/// Single owner of the live plan. Mutations are serialized; readers get
/// immutable snapshots. Subscribers run on the mutating thread, in order,
/// after the new plan is published.
class SliceManager {
public:
  using Listener = std::function<void(const ReconfigurationEvent&)>;

  SliceManager(SlicePlan plan, std::set<NodeId> all_nodes);

  std::shared_ptr<const SlicePlan> snapshot() const;
  std::uint64_t epoch() const;
  const std::set<NodeId>& all_nodes() const noexcept { return all_nodes_; }

  ReconfigurationEvent apply(const ReconfigurationDelta& change);
  ReconfigurationEvent replace(SlicePlan plan);
  void subscribe(Listener listener);

private:
  ReconfigurationEvent publish(SlicePlan next, bool replaced);

  std::mutex write_mutex_;  // serializes mutations and listener calls
  mutable std::mutex read_mutex_;
  std::set<NodeId> all_nodes_;
  std::shared_ptr<const SlicePlan> plan_;
  std::uint64_t epoch_ = 0;
  std::vector<Listener> listeners_;
};

}  // namespace denis
