#include "denis/sim.hpp"

#include "denis/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>
#include <set>
#include <tuple>
#include <unordered_map>

namespace denis {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

}  // namespace

std::string_view to_string(PacketFate fate) noexcept {
  switch (fate) {
    case PacketFate::in_flight: return "in_flight";
    case PacketFate::delivered: return "delivered";
    case PacketFate::dropped_collision: return "dropped_collision";
    case PacketFate::dropped_retry: return "dropped_retry";
    case PacketFate::dropped_queue: return "dropped_queue";
  }
  return "in_flight";
}

PdrReport make_pdr_report(std::uint64_t sent, std::uint64_t received) {
  PdrReport r;
  r.sent = sent;
  r.received = received;
  r.pdr_undefined = sent == 0;
  r.pdr = sent ? static_cast<double>(received) / static_cast<double>(sent) : 0.0;
  return r;
}

PdrReport compute_pdr(std::span<const PacketRecord> records) {
  std::uint64_t received = 0;
  for (const auto& p : records)
    if (p.fate == PacketFate::delivered) ++received;
  PdrReport r = make_pdr_report(records.size(), received);
  for (const auto& p : records) {
    auto& slice = r.per_slice[p.slice];
    ++slice.sent;
    switch (p.fate) {
      case PacketFate::delivered: ++slice.received; break;
      case PacketFate::dropped_collision: ++r.dropped_collision; break;
      case PacketFate::dropped_retry: ++r.dropped_retry; break;
      case PacketFate::dropped_queue: ++r.dropped_queue; break;
      case PacketFate::in_flight: ++r.in_flight; break;
    }
  }
  return r;
}

std::vector<Generation> generate_traffic(const TrafficProfile& profile, std::span<const NodeId> nodes,
                                         double duration, std::mt19937_64& rng) {
  if (!(profile.rate_per_min > 0.0)) throw Error(Errc::config, "traffic rate must be positive");
  const double period = profile.period();
  std::uniform_real_distribution<double> phase_dist(0.0, period);
  std::vector<Generation> out;
  for (NodeId node : nodes) {
    const double phase = phase_dist(rng);
    for (std::uint64_t k = 0;; ++k) {
      const double t = phase + static_cast<double>(k) * period;
      if (t >= duration) break;
      out.push_back({t, node});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Generation& a, const Generation& b) { return std::tie(a.time, a.node) < std::tie(b.time, b.node); });
  return out;
}

std::vector<Generation> generate_traffic(const TrafficProfile& profile, std::span<const NodeId> nodes,
                                         double duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return generate_traffic(profile, nodes, duration, rng);
}

AttemptOutcome attempt_transmit(bool medium_busy, MacCounters& counters, const MacParams& mac) {
  if (!medium_busy) return AttemptOutcome::started;
  if (counters.backoffs < mac.max_backoffs) {
    ++counters.backoffs;
    return AttemptOutcome::backoff;
  }
  if (counters.retries < mac.max_retries) {
    ++counters.retries;
    counters.backoffs = 0;
    return AttemptOutcome::backoff;
  }
  return AttemptOutcome::dropped_retry;
}

ReceptionOutcome resolve_reception(Channel receiver_channel, std::span<const Channel> overlapping) {
  const auto same = std::count(overlapping.begin(), overlapping.end(), receiver_channel);
  return same <= 1 ? ReceptionOutcome::rx : ReceptionOutcome::collision;
}

void EventLog::add(double time, std::string_view kind, NodeId node, std::optional<std::uint64_t> packet,
                   std::string_view slice, Channel channel, std::string_view detail) {
  char stamp[40];
  std::snprintf(stamp, sizeof stamp, "%.9f", time);
  text_ += stamp;
  text_ += ' ';
  text_ += kind;
  text_ += ' ';
  text_ += std::to_string(node);
  text_ += ' ';
  text_ += packet ? std::to_string(*packet) : "-";
  text_ += ' ';
  text_ += slice.empty() ? "-" : slice;
  text_ += ' ';
  text_ += std::to_string(channel);
  text_ += ' ';
  text_ += detail.empty() ? "-" : detail;
  text_ += '\n';
  ++lines_;
}

LogRecount recount_log(std::string_view text) {
  LogRecount out;
  std::unordered_map<std::string, int> fates;
  std::set<std::string> generated;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;

    std::string_view field[7];
    std::size_t start = 0;
    int n = 0;
    while (n < 7 && start <= line.size()) {
      auto space = n < 6 ? line.find(' ', start) : std::string_view::npos;
      if (space == std::string_view::npos) space = line.size();
      field[n++] = line.substr(start, space - start);
      start = space + 1;
    }
    if (n < 7) continue;
    const auto kind = field[1];
    const std::string packet(field[3]);
    const auto detail = field[6];

    if (kind == "generate") {
      ++out.generated;
      generated.insert(packet);
    } else if (kind == "rx" && detail == "delivered") {
      ++out.delivered;
      ++fates[packet];
    } else if (kind == "drop") {
      if (detail.starts_with("dropped_collision")) ++out.dropped_collision;
      else if (detail.starts_with("dropped_retry")) ++out.dropped_retry;
      else ++out.dropped_queue;
      ++fates[packet];
    } else if (kind == "in_flight") {
      ++out.in_flight;
      ++fates[packet];
    } else if (kind == "collision") {
      ++out.collisions;
      // detail: slices=A,B,...
      std::set<std::string_view> slices;
      auto list = detail.substr(detail.find('=') + 1);
      std::size_t s = 0;
      while (s <= list.size()) {
        auto comma = list.find(',', s);
        if (comma == std::string_view::npos) comma = list.size();
        slices.insert(list.substr(s, comma - s));
        s = comma + 1;
      }
      if (slices.size() > 1) ++out.cross_slice_collisions;
    }
  }
  for (const auto& [packet, count] : fates)
    if (count > 1) ++out.packets_with_multiple_fates;
  for (const auto& packet : generated)
    if (!fates.count(packet)) ++out.packets_without_fate;
  return out;
}

bool Simulation::Event::operator>(const Event& other) const {
  return std::tie(time, kind, node, packet, serial) >
         std::tie(other.time, other.kind, other.node, other.packet, other.serial);
}

Simulation::Simulation(std::span<const NodeRecord> nodes, double comm_range, const SlicePlan& plan,
                       FlowTables flows, SimConfig config)
    : config_(std::move(config)),
      airtime_(config_.mac.airtime(config_.traffic.payload_bytes)),
      flows_(std::move(flows)),
      rng_(config_.seed),
      backoff_dist_(config_.mac.backoff_min, config_.mac.backoff_max) {
  if (!(config_.duration > 0.0)) throw Error(Errc::config, "simulation duration must be positive");
  if (!(comm_range > 0.0)) throw Error(Errc::config, "communication range must be positive");

  std::vector<NodeRecord> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  nodes_.reserve(sorted.size());
  for (const auto& rec : sorted) {
    Node n;
    n.id = rec.id;
    n.position = rec.position;
    n.router = rec.is_border_router();
    if (!index_.emplace(rec.id, nodes_.size()).second)
      throw Error(Errc::config, "duplicate node id " + std::to_string(rec.id));
    nodes_.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (std::size_t j = i + 1; j < nodes_.size(); ++j)
      if (distance(nodes_[i].position, nodes_[j].position) <= comm_range) {
        nodes_[i].in_range.push_back(j);
        nodes_[j].in_range.push_back(i);
      }
  active_tx_.assign(nodes_.size(), npos);
  update_plan(plan);

  std::vector<NodeId> sources;
  for (const auto& n : nodes_)
    if (!n.router) sources.push_back(n.id);
  for (const auto& g : generate_traffic(config_.traffic, sources, config_.duration, rng_))
    schedule(g.time, EventKind::generate, index_.at(g.node));
}

void Simulation::update_plan(const SlicePlan& plan) {
  for (auto& n : nodes_) {
    const auto* slice = plan.slice_of(n.id);
    if (!slice) throw Error(Errc::lookup, "node " + std::to_string(n.id) + " belongs to no slice");
    n.slice = slice->id;
    n.sink = slice->border_router;
    n.channel = plan.channel_of(*slice);
  }
}

void Simulation::retune(std::span<const RetuneDirective> directives) {
  for (const auto& d : directives) {
    auto it = index_.find(d.node);
    if (it == index_.end()) throw Error(Errc::lookup, "retune for unknown node " + std::to_string(d.node));
    nodes_[it->second].channel = d.channel;
  }
}

Channel Simulation::channel_of(NodeId node) const {
  auto it = index_.find(node);
  if (it == index_.end()) throw Error(Errc::lookup, "unknown node " + std::to_string(node));
  return nodes_[it->second].channel;
}

void Simulation::schedule(double time, EventKind kind, std::size_t node, std::uint64_t packet) {
  events_.push(Event{time, kind, nodes_[node].id, packet, serial_++, node});
}

bool Simulation::step() {
  if (finished_) return false;
  if (events_.empty() || events_.top().time > config_.duration) {
    finalize();
    return false;
  }
  const Event e = events_.top();
  events_.pop();
  now_ = e.time;
  switch (e.kind) {
    case EventKind::generate: handle_generate(e); break;
    case EventKind::tx_attempt: handle_attempt(e); break;
    case EventKind::tx_start: handle_tx_start(e); break;
    case EventKind::tx_end: handle_tx_end(e); break;
  }
  ++processed_;
  return true;
}

void Simulation::run_until(double time) {
  const double limit = std::min(time, config_.duration);
  while (!finished_ && !events_.empty() && events_.top().time <= limit) step();
  if (!finished_ && time >= config_.duration) finalize();
  if (!finished_) now_ = std::max(now_, limit);
}

PdrReport Simulation::run() {
  run_until(config_.duration);
  return report();
}

void Simulation::finalize() {
  if (finished_) return;
  now_ = config_.duration;
  for (const auto& p : packets_)
    if (p.fate == PacketFate::in_flight) {
      const auto& origin = nodes_[index_.at(p.origin)];
      log_.add(now_, "in_flight", origin.id, p.id, p.slice, origin.channel, "cutoff");
    }
  finished_ = true;
}

void Simulation::log(std::string_view kind, std::size_t node, std::optional<std::uint64_t> packet,
                     std::string_view detail) {
  if (!config_.record_log) return;
  const auto& n = nodes_[node];
  const std::string_view slice = packet ? std::string_view(packets_[*packet].slice) : std::string_view(n.slice);
  log_.add(now_, kind, n.id, packet, slice, n.channel, detail);
}

void Simulation::handle_generate(const Event& e) {
  auto& node = nodes_[e.index];
  PacketRecord p;
  p.id = packets_.size();
  p.origin = node.id;
  p.destination = node.sink;
  p.slice = node.slice;
  p.generated_at = now_;
  packets_.push_back(std::move(p));
  log("generate", e.index, packets_.back().id, {});
  enqueue(e.index, packets_.back().id, "queue-full");
}

void Simulation::enqueue(std::size_t node, std::uint64_t packet, std::string_view reason) {
  auto& n = nodes_[node];
  if (n.queue.size() >= config_.mac.queue_capacity) {
    drop(node, packet, PacketFate::dropped_queue, reason);
    return;
  }
  n.queue.push_back(packet);
  if (n.mac == Node::Mac::idle) start_next_frame(node);
}

std::optional<std::size_t> Simulation::lookup_next_hop(std::size_t node, NodeId destination) {
  const NodeId id = nodes_[node].id;
  if (const auto* rule = find_rule(flows_, id, destination)) return index_.at(rule->action_next_hop);
  if (!config_.reactive)
    throw Error(Errc::config, "node " + std::to_string(id) + " has no flow rule for destination " +
                                  std::to_string(destination) + " and reactive mode is off");
  if (!resolver_) return std::nullopt;
  const auto hop = resolver_(id, destination);
  if (!hop || !index_.count(*hop)) return std::nullopt;
  auto& list = flows_[id];
  list.push_back({id, destination, *hop, nodes_[node].slice});
  std::sort(list.begin(), list.end(),
            [](const FlowRule& a, const FlowRule& b) { return a.match_destination < b.match_destination; });
  return index_.at(*hop);
}

void Simulation::start_next_frame(std::size_t node) {
  auto& n = nodes_[node];
  while (!n.queue.empty()) {
    const auto packet = n.queue.front();
    const auto hop = lookup_next_hop(node, packets_[packet].destination);
    if (hop) {
      n.next_hop = hop;
      n.counters = {};
      n.mac = Node::Mac::sensing;
      schedule(now_, EventKind::tx_attempt, node, packet);
      return;
    }
    n.queue.pop_front();
    drop(node, packet, PacketFate::dropped_queue, "no-route");
  }
  n.mac = Node::Mac::idle;
  n.next_hop.reset();
}

bool Simulation::medium_busy(std::size_t node) const {
  const auto& n = nodes_[node];
  for (auto t : n.heard)
    if (transmissions_[t].channel == n.channel) return true;
  return false;
}

void Simulation::backoff(std::size_t node) {
  const auto packet = nodes_[node].queue.front();
  schedule(now_ + backoff_dist_(rng_), EventKind::tx_attempt, node, packet);
}

void Simulation::handle_attempt(const Event& e) {
  auto& n = nodes_[e.index];
  const auto packet = n.queue.front();
  const auto before = n.counters.retries;
  switch (attempt_transmit(medium_busy(e.index), n.counters, config_.mac)) {
    case AttemptOutcome::started:
      log("tx_attempt", e.index, packet, "idle");
      n.mac = Node::Mac::turnaround;
      schedule(now_ + config_.mac.turnaround, EventKind::tx_start, e.index, packet);
      break;
    case AttemptOutcome::backoff:
      log("tx_attempt", e.index, packet, "busy");
      if (n.counters.retries != before) log("retry", e.index, packet, "busy");
      backoff(e.index);
      break;
    case AttemptOutcome::dropped_retry:
      log("tx_attempt", e.index, packet, "busy");
      drop(e.index, packet, PacketFate::dropped_retry, "busy");
      finish_head(e.index);
      break;
  }
}

void Simulation::corrupt(Transmission& tx, const Transmission& other) {
  tx.corrupted = true;
  const auto& slice = packets_[other.packet].slice;
  if (std::find(tx.colliding_slices.begin(), tx.colliding_slices.end(), slice) == tx.colliding_slices.end())
    tx.colliding_slices.push_back(slice);
}

void Simulation::handle_tx_start(const Event& e) {
  auto& sender = nodes_[e.index];
  Transmission tx;
  tx.sender = e.index;
  tx.receiver = *sender.next_hop;
  tx.packet = sender.queue.front();
  tx.channel = sender.channel;
  tx.colliding_slices.push_back(packets_[tx.packet].slice);
  const auto id = transmissions_.size();

  // Half duplex: whatever the sender was receiving is lost.
  for (auto t : sender.heard)
    if (transmissions_[t].receiver == e.index) corrupt(transmissions_[t], tx);
  if (active_tx_[tx.receiver] != npos) corrupt(tx, transmissions_[active_tx_[tx.receiver]]);
  if (nodes_[tx.receiver].channel != tx.channel) tx.corrupted = true;

  for (auto j : sender.in_range) {
    auto& hearer = nodes_[j];
    if (hearer.channel != tx.channel) continue;
    for (auto t : hearer.heard) {
      auto& other = transmissions_[t];
      if (other.channel != tx.channel) continue;
      if (other.receiver == j) corrupt(other, tx);
      if (tx.receiver == j) corrupt(tx, other);
    }
    hearer.heard.push_back(id);
    tx.hearers.push_back(j);
  }
  transmissions_.push_back(std::move(tx));
  active_tx_[e.index] = id;
  sender.mac = Node::Mac::transmitting;
  schedule(now_ + airtime_, EventKind::tx_end, e.index, e.packet);
}

void Simulation::handle_tx_end(const Event& e) {
  auto& sender = nodes_[e.index];
  const auto id = active_tx_[e.index];
  auto& tx = transmissions_[id];
  tx.active = false;
  active_tx_[e.index] = npos;
  for (auto j : tx.hearers) {
    auto& heard = nodes_[j].heard;
    heard.erase(std::remove(heard.begin(), heard.end(), id), heard.end());
  }
  std::vector<std::size_t>().swap(tx.hearers);
  const auto packet = tx.packet;
  const bool corrupted = tx.corrupted;
  auto slices = std::move(tx.colliding_slices);
  tx.colliding_slices = {};

  if (!corrupted) {
    log("tx_end", e.index, packet, "ok");
    auto& record = packets_[packet];
    ++record.hops;
    const auto receiver = tx.receiver;
    if (nodes_[receiver].id == record.destination) {
      record.fate = PacketFate::delivered;
      record.finished_at = now_;
      log("rx", receiver, packet, "delivered");
    } else {
      log("rx", receiver, packet, "forward");
      enqueue(receiver, packet, "relay-queue-full");
    }
    finish_head(e.index);
    return;
  }

  log("tx_end", e.index, packet, "collision");
  if (config_.record_log) {
    std::string detail = "slices=";
    std::sort(slices.begin(), slices.end());
    for (std::size_t i = 0; i < slices.size(); ++i) detail += (i ? "," : "") + slices[i];
    log("collision", tx.receiver, packet, detail);
  }
  if (sender.counters.retries < config_.mac.max_retries) {
    ++sender.counters.retries;
    sender.counters.backoffs = 0;
    sender.mac = Node::Mac::sensing;
    log("retry", e.index, packet, "collision");
    backoff(e.index);
    return;
  }
  drop(e.index, packet, PacketFate::dropped_collision, "collision");
  finish_head(e.index);
}

void Simulation::finish_head(std::size_t node) {
  auto& n = nodes_[node];
  n.queue.pop_front();
  n.counters = {};
  n.mac = Node::Mac::idle;
  start_next_frame(node);
}

void Simulation::drop(std::size_t node, std::uint64_t packet, PacketFate fate, std::string_view why) {
  auto& record = packets_[packet];
  record.fate = fate;
  record.finished_at = now_;
  if (config_.record_log) log("drop", node, packet, std::string(to_string(fate)) + ":" + std::string(why));
}

}  // namespace denis
