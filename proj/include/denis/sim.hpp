#pragma once

#include "denis/controller.hpp"
#include "denis/slicing.hpp"
#include "denis/topology.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace denis {

struct TrafficProfile {
  double rate_per_min = 6.0;      // data packets per minute per node
  std::size_t payload_bytes = 128;

  double period() const noexcept { return 60.0 / rate_per_min; }
};

/// CSMA-lite parameters. Defaults follow IEEE 802.15.4 at 2.4 GHz.
struct MacParams {
  double bit_rate = 250'000.0;        // bit/s
  std::size_t header_bytes = 23;
  double backoff_min = 0.32e-3;       // s
  double backoff_max = 2.56e-3;       // s
  int max_backoffs = 4;               // busy CCAs tolerated per attempt
  int max_retries = 3;                // attempts after the first
  std::size_t queue_capacity = 8;     // frames, drop-tail
  double turnaround = 192e-6;         // CCA-to-radiation delay, s

  double airtime(std::size_t payload_bytes) const noexcept {
    return static_cast<double>(payload_bytes + header_bytes) * 8.0 / bit_rate;
  }
};

enum class PacketFate { in_flight, delivered, dropped_collision, dropped_retry, dropped_queue };

std::string_view to_string(PacketFate fate) noexcept;

struct PacketRecord {
  std::uint64_t id = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  SliceId slice;
  double generated_at = 0.0;
  PacketFate fate = PacketFate::in_flight;
  double finished_at = 0.0;
  std::size_t hops = 0;  // successful link traversals
};

struct PdrCounts {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;

  bool undefined() const noexcept { return sent == 0; }
  /// received / sent; 0 when undefined.
  double pdr() const noexcept { return sent ? static_cast<double>(received) / static_cast<double>(sent) : 0.0; }
  friend bool operator==(const PdrCounts&, const PdrCounts&) = default;
};

struct PdrReport {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  double pdr = 0.0;
  bool pdr_undefined = true;
  std::map<SliceId, PdrCounts> per_slice;
  std::uint64_t dropped_collision = 0;
  std::uint64_t dropped_retry = 0;
  std::uint64_t dropped_queue = 0;
  std::uint64_t in_flight = 0;

  std::uint64_t dropped() const noexcept { return dropped_collision + dropped_retry + dropped_queue; }
  friend bool operator==(const PdrReport&, const PdrReport&) = default;
};

/// PDR = sum(received) / sum(sent), overall and per slice.
PdrReport compute_pdr(std::span<const PacketRecord> records);
PdrReport make_pdr_report(std::uint64_t sent, std::uint64_t received);

struct Generation {
  double time = 0.0;
  NodeId node = 0;

  friend bool operator==(const Generation&, const Generation&) = default;
};

/// Periodic sources with one uniform phase in [0, period) per node, drawn in
/// the order of `nodes`. Sorted by (time, node).
std::vector<Generation> generate_traffic(const TrafficProfile& profile, std::span<const NodeId> nodes,
                                         double duration, std::mt19937_64& rng);
std::vector<Generation> generate_traffic(const TrafficProfile& profile, std::span<const NodeId> nodes,
                                         double duration, std::uint64_t seed);

// Medium-access outcomes, exposed for testing the rules in isolation.
enum class AttemptOutcome { started, backoff, dropped_retry };

struct MacCounters {
  int backoffs = 0;  // busy CCAs in the current attempt
  int retries = 0;
};

/// One CCA: idle -> started; busy -> backoff until the per-attempt budget is
/// spent, which consumes a retry; out of retries -> dropped_retry. Updates
/// `counters` accordingly.
AttemptOutcome attempt_transmit(bool medium_busy, MacCounters& counters, const MacParams& mac);

enum class ReceptionOutcome { rx, collision };

/// Same-channel frames overlapping at one receiver. Frames on other channels
/// never interact; one same-channel frame is received, two or more collide.
ReceptionOutcome resolve_reception(Channel receiver_channel, std::span<const Channel> overlapping);

struct SimConfig {
  TrafficProfile traffic;
  double duration = 1800.0;  // s
  std::uint64_t seed = 1;
  MacParams mac;
  bool reactive = true;      // ask the controller on a flow-table miss
  bool record_log = false;
};

/// Event kinds in tie-break order at equal timestamps.
enum class EventKind { tx_end, tx_start, generate, tx_attempt };

/// Line-oriented trace: `time kind node packet slice channel detail`.
class EventLog {
public:
  void add(double time, std::string_view kind, NodeId node, std::optional<std::uint64_t> packet,
           std::string_view slice, Channel channel, std::string_view detail);
  const std::string& text() const noexcept { return text_; }
  std::size_t lines() const noexcept { return lines_; }

private:
  std::string text_;
  std::size_t lines_ = 0;
};

/// Totals recomputed from a log's text alone.
struct LogRecount {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_collision = 0;
  std::uint64_t dropped_retry = 0;
  std::uint64_t dropped_queue = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t collisions = 0;
  std::uint64_t cross_slice_collisions = 0;
  std::uint64_t packets_with_multiple_fates = 0;
  std::uint64_t packets_without_fate = 0;
};

LogRecount recount_log(std::string_view log_text);

/// Single-threaded discrete-event run over one topology and plan.
class Simulation {
public:
  using RouteResolver = std::function<std::optional<NodeId>(NodeId node, NodeId destination)>;

  Simulation(std::span<const NodeRecord> nodes, double comm_range, const SlicePlan& plan,
             FlowTables flows, SimConfig config);

  void set_route_resolver(RouteResolver resolver) { resolver_ = std::move(resolver); }
  /// Takes effect at the next event boundary.
  void update_flows(FlowTables flows) { flows_ = std::move(flows); }
  void update_plan(const SlicePlan& plan);
  void retune(std::span<const RetuneDirective> directives);

  /// Processes one event; false once the run is complete.
  bool step();
  void run_until(double time);
  PdrReport run();

  double now() const noexcept { return now_; }
  bool finished() const noexcept { return finished_; }
  std::uint64_t events_processed() const noexcept { return processed_; }
  const SimConfig& config() const noexcept { return config_; }

  /// Live report; packets still queued count as in flight.
  PdrReport report() const { return compute_pdr(packets_); }
  const std::vector<PacketRecord>& packets() const noexcept { return packets_; }
  const EventLog& log() const noexcept { return log_; }
  Channel channel_of(NodeId node) const;

private:
  struct Node {
    NodeId id = 0;
    Position position;
    bool router = false;
    Channel channel = kSharedDataChannel;
    SliceId slice;
    NodeId sink = 0;
    std::vector<std::size_t> in_range;  // geometric neighbors (indices)

    std::deque<std::uint64_t> queue;
    enum class Mac { idle, sensing, turnaround, transmitting } mac = Mac::idle;
    MacCounters counters;
    std::optional<std::size_t> next_hop;
    std::vector<std::size_t> heard;  // active transmissions in range
  };

  struct Transmission {
    std::size_t sender = 0;
    std::size_t receiver = 0;
    std::uint64_t packet = 0;
    Channel channel = kSharedDataChannel;
    std::vector<std::size_t> hearers;
    bool corrupted = false;
    std::vector<SliceId> colliding_slices;
    bool active = true;
  };

  struct Event {
    double time;
    EventKind kind;
    NodeId node;
    std::uint64_t packet;
    std::uint64_t serial;
    std::size_t index;  // node index

    bool operator>(const Event& other) const;
  };

  void schedule(double time, EventKind kind, std::size_t node, std::uint64_t packet = 0);
  void handle_generate(const Event& e);
  void handle_attempt(const Event& e);
  void handle_tx_start(const Event& e);
  void handle_tx_end(const Event& e);

  void enqueue(std::size_t node, std::uint64_t packet, std::string_view reason);
  void start_next_frame(std::size_t node);
  void backoff(std::size_t node);
  void finish_head(std::size_t node);
  void drop(std::size_t node, std::uint64_t packet, PacketFate fate, std::string_view why);
  bool medium_busy(std::size_t node) const;
  void corrupt(Transmission& tx, const Transmission& other);
  void finalize();
  std::optional<std::size_t> lookup_next_hop(std::size_t node, NodeId destination);
  void log(std::string_view kind, std::size_t node, std::optional<std::uint64_t> packet,
           std::string_view detail);

  SimConfig config_;
  double airtime_;
  std::vector<Node> nodes_;
  std::map<NodeId, std::size_t> index_;
  FlowTables flows_;
  RouteResolver resolver_;
  std::vector<PacketRecord> packets_;
  std::vector<Transmission> transmissions_;
  std::vector<std::size_t> active_tx_;  // per node: index into transmissions_, or npos
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> backoff_dist_;
  EventLog log_;
  double now_ = 0.0;
  std::uint64_t serial_ = 0;
  std::uint64_t processed_ = 0;
  bool finished_ = false;
};

}  // namespace denis
