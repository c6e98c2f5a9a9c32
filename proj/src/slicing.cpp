#include "denis/slicing.hpp"

#include "denis/error.hpp"

#include <algorithm>
#include <utility>

namespace denis {

std::string_view to_string(SliceMode mode) noexcept {
  switch (mode) {
    case SliceMode::non_sliced: return "non-sliced";
    case SliceMode::logical: return "logical";
    case SliceMode::physical: return "physical";
  }
  return "non-sliced";
}

SliceMode slice_mode_from_string(std::string_view text) {
  if (text == "non-sliced" || text == "none") return SliceMode::non_sliced;
  if (text == "logical") return SliceMode::logical;
  if (text == "physical") return SliceMode::physical;
  throw Error(Errc::config, "unknown slicing mode '" + std::string(text) + "'");
}

std::string_view to_string(DensityTier tier) noexcept {
  switch (tier) {
    case DensityTier::green: return "green";
    case DensityTier::yellow: return "yellow";
    case DensityTier::amber: return "amber";
    case DensityTier::red: return "red";
  }
  return "green";
}

const SliceSpec* SlicePlan::find(const SliceId& id) const {
  auto it = std::find_if(slices.begin(), slices.end(), [&](const SliceSpec& s) { return s.id == id; });
  return it == slices.end() ? nullptr : &*it;
}

SliceSpec* SlicePlan::find(const SliceId& id) {
  return const_cast<SliceSpec*>(std::as_const(*this).find(id));
}

const SliceSpec* SlicePlan::slice_of(NodeId node) const {
  for (const auto& s : slices)
    if (s.members.count(node) || s.border_router == node) return &s;
  return nullptr;
}

Channel SlicePlan::channel_of(const SliceSpec& slice) const {
  if (mode == SliceMode::physical && slice.channel) return *slice.channel;
  return kSharedDataChannel;
}

std::set<NodeId> SlicePlan::border_routers() const {
  std::set<NodeId> out;
  for (const auto& s : slices) out.insert(s.border_router);
  return out;
}

namespace {

std::string node_list(const std::vector<NodeId>& ids) {
  std::string out;
  for (NodeId id : ids) {
    if (!out.empty()) out += ", ";
    out += std::to_string(id);
  }
  return out;
}

void check_channel_range(Channel c) {
  if (c < kMinChannel || c > kMaxChannel)
    throw Error(Errc::channel_range, "channel " + std::to_string(c) + " outside [11, 26]");
}

}  // namespace

void validate_plan(const SlicePlan& plan) {
  if (plan.slices.empty()) throw Error(Errc::validation, "plan has no slices");
  if (plan.mode == SliceMode::non_sliced && plan.slices.size() != 1)
    throw Error(Errc::validation, "non-sliced mode takes exactly one slice");
  if (plan.mode == SliceMode::physical && plan.slices.size() > kMaxPhysicalSlices)
    throw Error(Errc::slice_capacity, std::to_string(plan.slices.size()) +
                                          " physical slices requested, at most 16 channels exist");

  std::set<SliceId> ids;
  std::set<NodeId> routers;
  std::map<NodeId, int> owner_count;
  std::set<Channel> channels;
  for (const auto& s : plan.slices) {
    if (s.id.empty()) throw Error(Errc::validation, "slice with empty id");
    if (!ids.insert(s.id).second) throw Error(Errc::validation, "duplicate slice id '" + s.id + "'");
    if (!routers.insert(s.border_router).second)
      throw Error(Errc::validation,
                  "border router " + std::to_string(s.border_router) + " serves more than one slice");
    if (!s.members.count(s.border_router))
      throw Error(Errc::validation, "slice '" + s.id + "' does not contain its border router " +
                                        std::to_string(s.border_router));
    for (NodeId n : s.members) ++owner_count[n];
    if (plan.mode == SliceMode::physical) {
      if (!s.channel) throw Error(Errc::validation, "slice '" + s.id + "' has no channel in physical mode");
      check_channel_range(*s.channel);
      if (!channels.insert(*s.channel).second)
        throw Error(Errc::channel_conflict, "channel " + std::to_string(*s.channel) + " assigned twice");
    } else if (s.channel) {
      throw Error(Errc::validation, "slice '" + s.id + "' carries a channel outside physical mode");
    }
  }
  std::vector<NodeId> doubled;
  for (const auto& [n, count] : owner_count)
    if (count > 1) doubled.push_back(n);
  if (!doubled.empty())
    throw Error(Errc::validation, "nodes assigned to more than one slice: " + node_list(doubled));
  if (!ids.count(plan.default_slice))
    throw Error(Errc::validation, "default slice '" + plan.default_slice + "' is not defined");
}

SlicePlan normalize_plan(SlicePlan plan, const std::set<NodeId>& all_nodes) {
  for (auto& s : plan.slices) s.members.insert(s.border_router);
  validate_plan(plan);

  std::set<NodeId> claimed;
  for (const auto& s : plan.slices) {
    for (NodeId n : s.members) {
      if (!all_nodes.count(n))
        throw Error(Errc::lookup, "slice '" + s.id + "' references unknown node " + std::to_string(n));
      claimed.insert(n);
    }
  }
  auto* fallback = plan.find(plan.default_slice);
  for (NodeId n : all_nodes)
    if (!claimed.count(n)) fallback->members.insert(n);
  return plan;
}

std::map<SliceId, ConnectivityGraph> partition(const ConnectivityGraph& g, const SlicePlan& plan) {
  std::map<SliceId, ConnectivityGraph> out;
  for (const auto& s : plan.slices) {
    std::set<NodeId> keep = s.members;
    keep.insert(s.border_router);
    ConnectivityGraph sub;
    for (NodeId n : keep) {
      if (!g.contains(n)) continue;
      sub.add_node(n);
      for (NodeId m : g.neighbors(n))
        if (n < m && keep.count(m)) sub.add_edge(n, m);
    }
    out.emplace(s.id, std::move(sub));
  }
  return out;
}

SlicePlan assign_channels(SlicePlan plan, const std::map<SliceId, Channel>& requested) {
  if (plan.mode != SliceMode::physical)
    throw Error(Errc::validation, "channels are assigned only in physical mode");
  if (plan.slices.size() > kMaxPhysicalSlices)
    throw Error(Errc::slice_capacity, std::to_string(plan.slices.size()) +
                                          " physical slices requested, at most 16 channels exist");

  std::map<SliceId, Channel> fixed;
  for (const auto& s : plan.slices)
    if (s.channel) fixed[s.id] = *s.channel;
  for (const auto& [id, c] : requested) {
    if (!plan.find(id)) throw Error(Errc::lookup, "channel requested for unknown slice '" + id + "'");
    fixed[id] = c;
  }
  std::set<Channel> used;
  for (const auto& [id, c] : fixed) {
    check_channel_range(c);
    if (!used.insert(c).second)
      throw Error(Errc::channel_conflict, "channel " + std::to_string(c) + " requested twice");
  }
  Channel next = kMinChannel;
  for (auto& s : plan.slices) {
    if (auto it = fixed.find(s.id); it != fixed.end()) {
      s.channel = it->second;
      continue;
    }
    while (used.count(next)) ++next;
    s.channel = next;
    used.insert(next);
  }
  return plan;
}

DensityTier tier_for_percentile(double p) noexcept {
  if (p >= 0.90) return DensityTier::red;
  if (p >= 0.70) return DensityTier::amber;
  if (p >= 0.40) return DensityTier::yellow;
  return DensityTier::green;
}

std::map<NodeId, DensityClass> classify_density(const ConnectivityGraph& g,
                                                const std::set<NodeId>& excluded) {
  std::vector<std::pair<NodeId, std::size_t>> degrees;
  for (const auto& [id, list] : g.adjacency())
    if (!excluded.count(id)) degrees.emplace_back(id, list.size());

  std::vector<std::size_t> sorted;
  sorted.reserve(degrees.size());
  for (const auto& d : degrees) sorted.push_back(d.second);
  std::sort(sorted.begin(), sorted.end());

  const double others = degrees.size() > 1 ? static_cast<double>(degrees.size() - 1) : 1.0;
  std::map<NodeId, DensityClass> out;
  for (const auto& [id, degree] : degrees) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), degree) - sorted.begin();
    const double p = static_cast<double>(below) / others;
    out.emplace(id, DensityClass{tier_for_percentile(p), p});
  }
  return out;
}

SlicePlan apply_reconfiguration(const SlicePlan& plan, const ReconfigurationDelta& change,
                                const std::set<NodeId>& all_nodes) {
  SlicePlan next = plan;
  for (const auto& move : change.moves) {
    auto* target = next.find(move.to_slice);
    if (!target) throw Error(Errc::lookup, "unknown slice '" + move.to_slice + "'");
    if (!all_nodes.count(move.node))
      throw Error(Errc::lookup, "unknown node " + std::to_string(move.node));
    for (auto& s : next.slices) {
      if (s.id == move.to_slice) continue;
      if (s.border_router == move.node)
        throw Error(Errc::validation, "node " + std::to_string(move.node) +
                                          " is the border router of slice '" + s.id + "'");
      s.members.erase(move.node);
    }
    target->members.insert(move.node);
  }
  for (const auto& retune : change.retunes) {
    if (next.mode != SliceMode::physical)
      throw Error(Errc::validation, "channel retune requires physical mode");
    auto* target = next.find(retune.slice);
    if (!target) throw Error(Errc::lookup, "unknown slice '" + retune.slice + "'");
    target->channel = retune.channel;
  }
  return normalize_plan(std::move(next), all_nodes);
}

SliceManager::SliceManager(SlicePlan plan, std::set<NodeId> all_nodes)
    : all_nodes_(std::move(all_nodes)),
      plan_(std::make_shared<const SlicePlan>(normalize_plan(std::move(plan), all_nodes_))) {}

std::shared_ptr<const SlicePlan> SliceManager::snapshot() const {
  std::lock_guard lock(read_mutex_);
  return plan_;
}

std::uint64_t SliceManager::epoch() const {
  std::lock_guard lock(read_mutex_);
  return epoch_;
}

ReconfigurationEvent SliceManager::apply(const ReconfigurationDelta& change) {
  std::lock_guard serial(write_mutex_);
  return publish(apply_reconfiguration(*snapshot(), change, all_nodes_), false);
}

ReconfigurationEvent SliceManager::replace(SlicePlan plan) {
  std::lock_guard serial(write_mutex_);
  return publish(normalize_plan(std::move(plan), all_nodes_), true);
}

void SliceManager::subscribe(Listener listener) {
  std::lock_guard serial(write_mutex_);
  listeners_.push_back(std::move(listener));
}

ReconfigurationEvent SliceManager::publish(SlicePlan next, bool replaced) {
  ReconfigurationEvent event;
  event.previous = *snapshot();
  event.current = next;
  event.replaced = replaced;
  for (NodeId n : all_nodes_) {
    const auto* before = event.previous.slice_of(n);
    const auto* after = event.current.slice_of(n);
    if (!before || !after || before->id != after->id) event.moved_nodes.push_back(n);
  }
  for (const auto& s : event.current.slices) {
    const auto* old = event.previous.find(s.id);
    if (event.current.channel_of(s) != (old ? event.previous.channel_of(*old) : kSharedDataChannel))
      event.retuned_slices.push_back(s.id);
  }
  {
    std::lock_guard lock(read_mutex_);
    plan_ = std::make_shared<const SlicePlan>(std::move(next));
    event.epoch = ++epoch_;
  }
  for (const auto& listener : listeners_) listener(event);
  return event;
}

}  // namespace denis
