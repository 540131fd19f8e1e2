#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beamsim/metrics.hpp"
#include "beamsim/mobility.hpp"
#include "beamsim/simulation.hpp"

namespace beamsim {

struct ScenarioConfig {
  double area_width = 2850.46;  // meters
  double area_height = 2000.04;
  std::vector<Position> rsu_positions{{200.0, 200.0}, {1200.0, 200.0}};
  double range_c = 300.0;
  std::uint32_t vehicle_count = 25;
  double speed_min_kmh = 80.0;
  double speed_max_kmh = 120.0;
  double threshold_speed_kmh = 100.0;
  double timer_periodic = 1.0;  // seconds
  double timer_status = 1.0;
  double timer_life = 30.0;
  double timer_ack = 1.0;
  double delta_deg = kDefaultDirectionDelta;
  int max_attempts = 3;
  double channel_base_latency = 0.002;
  double channel_jitter = 0.001;
  double channel_loss_probability = 0.0;
  std::string mobility_mode = "synthetic";  // synthetic | trace
  std::string mobility_trace;
  std::vector<double> mobility_lanes{200.0};
  std::vector<EmergencySpec> emergencies{{kNearestRsu, 100.0, EmergencyKind::SpeedSpike, 0.5}};
  std::vector<FailureSpec> failures;
  double join_probability = 1.0;
  bool detect_decrease = false;
  std::uint64_t seed = 42;
  double horizon = 500.0;
  Protocol protocol = Protocol::MyBeam;
  double tick = 0.1;
  double status_phase = 0.55;
  double metrics_window = 1.0;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// Flat `key = value` lines; `#` starts a comment. Unset keys keep their
// defaults. Throws ParseError for malformed lines and ValidationError for
// unknown keys, bad values, or violated invariants.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig parse_config_text(const std::string& text);
// Reads a file; a relative mobility.trace is resolved against its directory.
// Throws IoError when the file cannot be read.
ScenarioConfig load_config(const std::filesystem::path& path);

// Throws ValidationError naming the first violated invariant.
void validate(const ScenarioConfig& config);

// Every key, sorted, one per line; parse_config of the result is identical.
std::string serialize(const ScenarioConfig& config);
// 16 hex digits of FNV-1a over the serialized form.
std::string config_digest(const ScenarioConfig& config);

SimulationConfig simulation_config(const ScenarioConfig& config);
std::shared_ptr<const MobilityModel> build_mobility(const ScenarioConfig& config);

struct RunReport {
  std::string digest;
  Protocol protocol = Protocol::MyBeam;
  std::uint64_t seed = 0;
  RunSummary summary;
  std::string event_log;
  std::string metrics_csv;
  std::vector<std::string> files;  // written outputs, if any
  std::map<std::string, std::uint64_t> rng_draws;  // per substream, from the log
};

inline constexpr const char* kEventLogFile = "events.log";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kComparisonFile = "comparison.csv";

// Runs one simulation. With out_dir, writes events.log, metrics.csv and
// report.json there (IoError names the failing path). Emergencies and
// failures at or past the horizon never fire and are skipped.
RunReport run_scenario(const ScenarioConfig& config,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct SeedComparison {
  std::uint64_t seed = 0;
  RunReport beam;
  RunReport mybeam;
  std::optional<double> coverage_delta;  // mybeam - beam final coverage
};

struct ComparisonReport {
  std::vector<SeedComparison> seeds;
  std::string csv;
};

// Both protocols on every seed, run in parallel. Each run lands in
// out_dir/<protocol>-seed<n>/ and the side-by-side series in comparison.csv.
ComparisonReport compare(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace beamsim
