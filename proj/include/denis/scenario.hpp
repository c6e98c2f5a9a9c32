#pragma once

#include "denis/codet.hpp"
#include "denis/controller.hpp"
#include "denis/sim.hpp"
#include "denis/slicing.hpp"
#include "denis/topology.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace denis {

// Arena use case: 97 sensors, 21 corridor (slice A) and 76 chairs (slice B).
inline constexpr std::size_t kArenaSensors = 97;
inline constexpr std::size_t kCorridorSensors = 21;
inline constexpr std::size_t kChairSensors = 76;
inline constexpr Channel kCorridorChannel = 15;
inline constexpr Channel kChairChannel = 26;

struct Deployment {
  std::vector<NodeRecord> nodes;
  SlicePlan plan;  // normalized; channels assigned in physical mode
};

struct ArenaShape {
  std::size_t corridor = kCorridorSensors;  // slice A, linear
  std::size_t chairs = kChairSensors;       // slice B, grid
  Channel corridor_channel = kCorridorChannel;
  Channel chair_channel = kChairChannel;
};

/// Non-sliced: one 97-node grid with one border router at the south edge
/// midpoint. Sliced: 21-node corridor line (slice A) north of a 76-node chair
/// grid (slice B), one border router per slice at the north/south edge
/// midpoints. Corridor ids 1..21, chair ids 22..97, routers 98 (and 99).
Deployment build_arena(DensityLevel density, SliceMode mode, const ArenaShape& shape = {});

struct ScenarioConfig {
  std::string name = "scenario";
  DensityLevel density = DensityLevel::ultra;
  SliceMode mode = SliceMode::non_sliced;
  double comm_range = kDefaultRadioRange;
  TrafficProfile traffic;
  double duration = 1800.0;  // s
  std::uint64_t seed = 1;
  MacParams mac;
  ArenaShape arena;
  bool reactive = true;
  bool record_log = false;
  // Custom deployment; when absent the arena layout for density/mode is used.
  std::optional<Deployment> deployment;
  std::map<SliceId, Channel> channel_requests;
};

struct RunResult {
  ScenarioConfig config;
  PdrReport report;
  std::string event_log;  // empty unless record_log
  std::size_t route_hop_mismatches = 0;  // delivered packets whose hops != route length
};

/// Builds the controller state, installs proactive flows and runs one seed.
RunResult run_scenario(const ScenarioConfig& config);

/// The density x mode x rate x seed sweep.
struct MatrixConfig {
  std::vector<DensityLevel> densities;
  std::vector<SliceMode> modes;
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
  double comm_range = kDefaultRadioRange;
  double duration = 1800.0;
  std::size_t payload_bytes = 128;
  MacParams mac;
  ArenaShape arena;
  bool record_logs = false;
  std::size_t workers = 1;

  std::vector<ScenarioConfig> cells() const;
};

/// The reference sweep: five densities, three modes, 6 and 10
/// packets/min, `seeds` seeds 1..N.
MatrixConfig reference_matrix(std::size_t seeds = 5);

/// One CSV row per run.
struct ResultRow {
  std::string density;
  std::string mode;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::map<SliceId, PdrCounts> slices;
  std::uint64_t dropped_collision = 0;
  std::uint64_t dropped_retry = 0;
  std::uint64_t dropped_queue = 0;
  std::uint64_t in_flight = 0;

  double pdr() const noexcept { return sent ? static_cast<double>(received) / static_cast<double>(sent) : 0.0; }
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Custom deployments report their density as "custom".
ResultRow to_row(const RunResult& result);

/// Validates every cell, then runs them on `workers` threads. Rows come back
/// in cell order regardless of scheduling. `on_result` (optional) sees each
/// full result, including its event log, on a single thread at a time.
std::vector<ResultRow> run_matrix(const MatrixConfig& matrix,
                                  const std::function<void(const RunResult&)>& on_result = {});
/// Same contract over an explicit list of cells.
std::vector<ResultRow> run_cells(const std::vector<ScenarioConfig>& cells, std::size_t workers,
                                 const std::function<void(const RunResult&)>& on_result = {});

// density,mode,rate,seed,sent,received,pdr,slices,dropped_collision,
// dropped_retry,dropped_queue,in_flight
// `slices` is `id:sent:received` joined with ';'.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

struct CellSummary {
  std::string density;
  std::string mode;
  double rate = 0.0;
  std::string slice;  // empty for whole-network cells
  std::size_t runs = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool empty = false;  // no defined PDR in this cell
};

struct TrendVerdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Summary {
  std::vector<CellSummary> network;  // per (density, mode, rate)
  std::vector<CellSummary> slices;   // per (density, mode, rate, slice)
  std::vector<TrendVerdict> verdicts;
};

Summary summarize(const std::vector<ResultRow>& rows);
/// Mean network PDR of a cell, if present.
std::optional<double> cell_mean(const Summary& s, std::string_view density, std::string_view mode, double rate,
                                std::string_view slice = {});

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells);
void write_verdicts(std::ostream& out, const std::vector<TrendVerdict>& verdicts);

/// Scenario file: the plan schema extended with simulation fields.
MatrixConfig matrix_from_json(const nlohmann::json& j);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

}  // namespace denis
