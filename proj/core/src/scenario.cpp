#include "beamsim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace beamsim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(std::string_view(s).substr(pos, next - pos)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError(key + ": '" + s + "' is not a number");
  }
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError(key + ": '" + s + "' is not a valid integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ValidationError(key + ": expected true or false, got '" + s + "'");
}

std::string positions_text(const std::vector<Position>& ps) {
  std::string out;
  for (const auto& p : ps) {
    if (!out.empty()) out += ',';
    out += fmt(p.x) + ':' + fmt(p.y);
  }
  return out;
}

std::vector<Position> parse_positions(const std::string& key, const std::string& s) {
  std::vector<Position> out;
  for (const auto& item : split(s, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError(key + ": expected x:y, got '" + item + "'");
    out.push_back({to_double(key, trim(item.substr(0, colon))), to_double(key, trim(item.substr(colon + 1)))});
  }
  return out;
}

std::string emergencies_text(const std::vector<EmergencySpec>& es) {
  std::string out;
  for (const auto& e : es) {
    if (!out.empty()) out += ',';
    out += e.vehicle + '@' + fmt(e.at) + ':' + to_string(e.kind) + ':' + fmt(e.magnitude);
  }
  return out;
}

std::vector<EmergencySpec> parse_emergencies(const std::string& key, const std::string& s) {
  std::vector<EmergencySpec> out;
  for (const auto& item : split(s, ',')) {
    const auto at = item.rfind('@');
    const auto rest = at == std::string::npos ? std::vector<std::string>{} : split(item.substr(at + 1), ':');
    if (at == std::string::npos || at == 0 || rest.size() != 3) {
      throw ValidationError(key + ": expected <vehicle>@<t>:<kind>:<magnitude>, got '" + item + "'");
    }
    const auto kind = parse_emergency_kind(rest[1]);
    if (!kind) throw ValidationError(key + ": unknown emergency kind '" + rest[1] + "'");
    out.push_back({trim(item.substr(0, at)), to_double(key, rest[0]), *kind, to_double(key, rest[2])});
  }
  return out;
}

std::string failures_text(const std::vector<FailureSpec>& fs) {
  std::string out;
  for (const auto& f : fs) {
    if (!out.empty()) out += ',';
    out += f.vehicle + '@' + fmt(f.at);
  }
  return out;
}

std::vector<FailureSpec> parse_failures(const std::string& key, const std::string& s) {
  std::vector<FailureSpec> out;
  for (const auto& item : split(s, ',')) {
    const auto at = item.rfind('@');
    if (at == std::string::npos || at == 0) {
      throw ValidationError(key + ": expected <vehicle>@<t>, got '" + item + "'");
    }
    out.push_back({trim(item.substr(0, at)), to_double(key, trim(item.substr(at + 1)))});
  }
  return out;
}

std::string lanes_text(const std::vector<double>& ls) {
  std::string out;
  for (double l : ls) {
    if (!out.empty()) out += ',';
    out += fmt(l);
  }
  return out;
}

struct Key {
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string& key, const std::string&)> set;
};

template <typename T>
Key num_key(T ScenarioConfig::*field) {
  return {[field](const ScenarioConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(c.*field);
            } else {
              return std::to_string(c.*field);
            }
          },
          [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*field = to_double(k, v);
            } else {
              c.*field = to_int<T>(k, v);
            }
          }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> t;
    t["area.width"] = num_key(&ScenarioConfig::area_width);
    t["area.height"] = num_key(&ScenarioConfig::area_height);
    t["rsu.positions"] = {[](const ScenarioConfig& c) { return positions_text(c.rsu_positions); },
                          [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                            c.rsu_positions = parse_positions(k, v);
                          }};
    t["range_C"] = num_key(&ScenarioConfig::range_c);
    t["vehicle_count"] = num_key(&ScenarioConfig::vehicle_count);
    t["speed.min_kmh"] = num_key(&ScenarioConfig::speed_min_kmh);
    t["speed.max_kmh"] = num_key(&ScenarioConfig::speed_max_kmh);
    t["threshold_speed_kmh"] = num_key(&ScenarioConfig::threshold_speed_kmh);
    t["timers.periodic"] = num_key(&ScenarioConfig::timer_periodic);
    t["timers.status"] = num_key(&ScenarioConfig::timer_status);
    t["timers.life"] = num_key(&ScenarioConfig::timer_life);
    t["timers.ack"] = num_key(&ScenarioConfig::timer_ack);
    t["delta_deg"] = num_key(&ScenarioConfig::delta_deg);
    t["max_attempts"] = num_key(&ScenarioConfig::max_attempts);
    t["channel.base_latency"] = num_key(&ScenarioConfig::channel_base_latency);
    t["channel.jitter"] = num_key(&ScenarioConfig::channel_jitter);
    t["channel.loss_probability"] = num_key(&ScenarioConfig::channel_loss_probability);
    t["mobility.mode"] = {[](const ScenarioConfig& c) { return c.mobility_mode; },
                          [](ScenarioConfig& c, const std::string&, const std::string& v) {
                            c.mobility_mode = v;
                          }};
    t["mobility.trace"] = {[](const ScenarioConfig& c) { return c.mobility_trace; },
                           [](ScenarioConfig& c, const std::string&, const std::string& v) {
                             c.mobility_trace = v;
                           }};
    t["mobility.lanes"] = {[](const ScenarioConfig& c) { return lanes_text(c.mobility_lanes); },
                           [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                             c.mobility_lanes.clear();
                             for (const auto& s : split(v, ',')) c.mobility_lanes.push_back(to_double(k, s));
                           }};
    t["emergencies"] = {[](const ScenarioConfig& c) { return emergencies_text(c.emergencies); },
                        [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                          c.emergencies = parse_emergencies(k, v);
                        }};
    t["failures"] = {[](const ScenarioConfig& c) { return failures_text(c.failures); },
                     [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                       c.failures = parse_failures(k, v);
                     }};
    t["join_probability"] = num_key(&ScenarioConfig::join_probability);
    t["detect_decrease"] = {[](const ScenarioConfig& c) {
                              return std::string(c.detect_decrease ? "true" : "false");
                            },
                            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                              c.detect_decrease = to_bool(k, v);
                            }};
    t["seed"] = num_key(&ScenarioConfig::seed);
    t["horizon"] = num_key(&ScenarioConfig::horizon);
    t["protocol"] = {[](const ScenarioConfig& c) { return std::string(to_string(c.protocol)); },
                     [](ScenarioConfig& c, const std::string& k, const std::string& v) {
                       const auto p = parse_protocol(v);
                       if (!p) throw ValidationError(k + ": expected beam or mybeam, got '" + v + "'");
                       c.protocol = *p;
                     }};
    t["tick"] = num_key(&ScenarioConfig::tick);
    t["status_phase"] = num_key(&ScenarioConfig::status_phase);
    t["metrics.window"] = num_key(&ScenarioConfig::metrics_window);
    return t;
  }();
  return table;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig c;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "missing key");
    const auto it = keys().find(key);
    if (it == keys().end()) {
      throw ValidationError("unknown key '" + key + "' on line " + std::to_string(lineno));
    }
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate key '" + key + "' on line " + std::to_string(lineno));
    }
    it->second.set(c, key, value);
  }
  validate(c);
  return c;
}

ScenarioConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  ScenarioConfig c = parse_config(in);
  if (!c.mobility_trace.empty()) {
    const std::filesystem::path trace(c.mobility_trace);
    if (trace.is_relative()) c.mobility_trace = (path.parent_path() / trace).lexically_normal().string();
  }
  return c;
}

void validate(const ScenarioConfig& c) {
  require(c.area_width > 0.0 && c.area_height > 0.0, "area: width and height must be positive");
  require(c.range_c > 0.0, "range_C: must be positive");
  require(c.vehicle_count >= 1, "vehicle_count: must be at least 1");
  require(c.speed_min_kmh >= 0.0, "speed.min_kmh: must be non-negative");
  require(c.speed_min_kmh <= c.speed_max_kmh, "speed: min_kmh exceeds max_kmh");
  require(c.threshold_speed_kmh >= 0.0, "threshold_speed_kmh: must be non-negative");
  require(!c.rsu_positions.empty(), "rsu.positions: at least one RSU is required");
  for (const auto& p : c.rsu_positions) {
    require(p.x >= 0.0 && p.x <= c.area_width && p.y >= 0.0 && p.y <= c.area_height,
            "rsu.positions: RSU at " + fmt(p.x) + ":" + fmt(p.y) + " lies outside the area");
  }
  require(c.timer_periodic > 0.0, "timers.periodic: must be positive");
  require(c.timer_status > 0.0, "timers.status: must be positive");
  require(c.timer_life > 0.0, "timers.life: must be positive");
  require(c.timer_ack > 0.0, "timers.ack: must be positive");
  require(c.delta_deg >= 0.0 && c.delta_deg <= 180.0, "delta_deg: must lie in [0, 180]");
  require(c.max_attempts >= 0, "max_attempts: must be non-negative");
  require(c.channel_base_latency >= 0.0, "channel.base_latency: must be non-negative");
  require(c.channel_jitter >= 0.0, "channel.jitter: must be non-negative");
  require(c.channel_jitter <= c.channel_base_latency, "channel.jitter: exceeds channel.base_latency");
  require(c.channel_loss_probability >= 0.0 && c.channel_loss_probability <= 1.0,
          "channel.loss_probability: must lie in [0, 1]");
  require(c.mobility_mode == "synthetic" || c.mobility_mode == "trace",
          "mobility.mode: expected synthetic or trace");
  require(c.mobility_mode != "trace" || !c.mobility_trace.empty(),
          "mobility.trace: required when mobility.mode = trace");
  require(!c.mobility_lanes.empty(), "mobility.lanes: at least one lane is required");
  for (double l : c.mobility_lanes) {
    require(l >= 0.0 && l <= c.area_height, "mobility.lanes: lane " + fmt(l) + " lies outside the area");
  }
  for (const auto& e : c.emergencies) {
    require(e.at >= 0.0, "emergencies: injection time must be non-negative");
    require(!e.vehicle.empty(), "emergencies: vehicle missing");
  }
  for (const auto& f : c.failures) {
    require(f.at >= 0.0, "failures: failure time must be non-negative");
  }
  require(c.join_probability >= 0.0 && c.join_probability <= 1.0,
          "join_probability: must lie in [0, 1]");
  require(c.horizon >= 0.0, "horizon: must be non-negative");
  require(c.tick > 0.0, "tick: must be positive");
  require(c.status_phase >= 0.0, "status_phase: must be non-negative");
  require(c.metrics_window > 0.0, "metrics.window: must be positive");
}

std::string serialize(const ScenarioConfig& c) {
  std::string out;
  for (const auto& [key, k] : keys()) out += key + " = " + k.get(c) + "\n";
  return out;
}

std::string config_digest(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SimulationConfig simulation_config(const ScenarioConfig& c) {
  SimulationConfig s;
  s.protocol = c.protocol;
  s.seed = c.seed;
  s.horizon = SimTime::from_seconds(c.horizon);
  s.tick = SimTime::from_seconds(c.tick);
  s.status_phase = SimTime::from_seconds(c.status_phase);
  s.rsus = c.rsu_positions;
  s.range_c = c.range_c;
  s.threshold_speed = c.threshold_speed_kmh * kKmhToMps;
  s.delta = c.delta_deg;
  s.timers.periodic = SimTime::from_seconds(c.timer_periodic);
  s.timers.status = SimTime::from_seconds(c.timer_status);
  s.timers.life = SimTime::from_seconds(c.timer_life);
  s.timers.ack = SimTime::from_seconds(c.timer_ack);
  s.max_attempts = c.max_attempts;
  s.channel.range = c.range_c;
  s.channel.base_latency = SimTime::from_seconds(c.channel_base_latency);
  s.channel.jitter = SimTime::from_seconds(c.channel_jitter);
  s.channel.loss_probability = c.channel_loss_probability;
  s.join_probability = c.join_probability;
  s.detect_decrease = c.detect_decrease;
  return s;
}

std::shared_ptr<const MobilityModel> build_mobility(const ScenarioConfig& c) {
  if (c.mobility_mode == "trace") {
    std::ifstream in(c.mobility_trace);
    if (!in) throw IoError("cannot read trace " + c.mobility_trace);
    return std::make_shared<const MobilityModel>(load_trace(in));
  }
  SyntheticParams p;
  p.area_width = c.area_width;
  p.area_height = c.area_height;
  p.lane_offsets = c.mobility_lanes;
  p.speed_min = c.speed_min_kmh * kKmhToMps;
  p.speed_max = c.speed_max_kmh * kKmhToMps;
  p.vehicle_count = c.vehicle_count;
  p.seed = c.seed;
  return std::make_shared<const MobilityModel>(MobilityModel::synthetic(p));
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  validate(config);
  const SimulationConfig sc = simulation_config(config);
  Simulation sim(sc, build_mobility(config));
  for (const auto& e : config.emergencies) {
    if (SimTime::from_seconds(e.at) < sc.horizon) sim.inject_emergency(e);
  }
  for (const auto& f : config.failures) {
    if (SimTime::from_seconds(f.at) < sc.horizon) sim.inject_failure(f);
  }
  const EventLog& log = sim.run();

  RunReport report;
  report.digest = config_digest(config);
  report.protocol = config.protocol;
  report.seed = config.seed;
  report.event_log = log.str();
  for (const auto& line : log.lines()) {
    const LogRecord r = parse_log_line(line);
    if (r.kind != "rng") continue;
    const auto stream = r.field("stream");
    const auto draws = r.field("draws");
    if (stream && draws) report.rng_draws[std::string(*stream)] = std::stoull(std::string(*draws));
  }
  const MetricsLedger ledger = build_ledger(log.lines());
  report.summary = summarize(ledger);
  std::ostringstream csv;
  write_series(csv, to_string(config.protocol),
               metrics_series(ledger, SimTime::from_seconds(config.metrics_window)));
  report.metrics_csv = csv.str();

  if (out_dir) {
    make_dir(*out_dir);
    const auto log_path = *out_dir / kEventLogFile;
    const auto csv_path = *out_dir / kMetricsFile;
    const auto json_path = *out_dir / kReportFile;
    write_file(log_path, report.event_log);
    write_file(csv_path, report.metrics_csv);
    report.files = {log_path.string(), csv_path.string(), json_path.string()};

    const auto& s = report.summary;
    nlohmann::ordered_json j;
    j["digest"] = report.digest;
    j["protocol"] = to_string(report.protocol);
    j["seed"] = report.seed;
    j["summary"] = {{"mean_throughput_kbps", s.mean_throughput_kbps},
                    {"final_pdr_pct", opt(s.final_pdr_pct)},
                    {"mean_delay_ms", opt(s.mean_delay_ms)},
                    {"final_coverage_pct", opt(s.final_coverage_pct)},
                    {"sends", s.sends},
                    {"receives", s.receives},
                    {"unsendable", s.unsendable}};
    j["files"] = report.files;
    write_file(json_path, j.dump(2) + "\n");
  }
  return report;
}

namespace {

std::vector<std::vector<std::string>> csv_rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const auto next = line.find(',', pos);
      cells.push_back(line.substr(pos, next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

ComparisonReport compare(const ScenarioConfig& config, const std::vector<std::uint64_t>& seeds,
                         const std::optional<std::filesystem::path>& out_dir) {
  if (seeds.empty()) throw PreconditionError("compare needs at least one seed");
  validate(config);

  struct Job {
    ScenarioConfig cfg;
    std::optional<std::filesystem::path> dir;
  };
  std::vector<Job> jobs;
  for (auto seed : seeds) {
    for (auto p : {Protocol::Beam, Protocol::MyBeam}) {
      Job j{config, std::nullopt};
      j.cfg.seed = seed;
      j.cfg.protocol = p;
      if (out_dir) j.dir = *out_dir / (std::string(to_string(p)) + "-seed" + std::to_string(seed));
      jobs.push_back(std::move(j));
    }
  }

  std::vector<RunReport> results(jobs.size());
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t base = 0; base < jobs.size(); base += workers) {
    std::vector<std::future<RunReport>> batch;
    for (std::size_t i = base; i < std::min(jobs.size(), base + workers); ++i) {
      batch.push_back(std::async(std::launch::async, [&job = jobs[i]] {
        RunReport r = run_scenario(job.cfg, job.dir);
        r.event_log.clear();
        r.event_log.shrink_to_fit();
        return r;
      }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) results[base + k] = batch[k].get();
  }

  ComparisonReport out;
  std::ostringstream csv;
  csv << "seed,t_s,beam_throughput_kbps,mybeam_throughput_kbps,beam_pdr_pct,mybeam_pdr_pct,"
         "beam_avg_delay_ms,mybeam_avg_delay_ms,beam_coverage_pct,mybeam_coverage_pct\n";
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    SeedComparison sc;
    sc.seed = seeds[s];
    sc.beam = std::move(results[2 * s]);
    sc.mybeam = std::move(results[2 * s + 1]);
    const auto& bc = sc.beam.summary.final_coverage_pct;
    const auto& mc = sc.mybeam.summary.final_coverage_pct;
    if (bc && mc) sc.coverage_delta = *mc - *bc;

    const auto beam_rows = csv_rows(sc.beam.metrics_csv);
    const auto mybeam_rows = csv_rows(sc.mybeam.metrics_csv);
    for (std::size_t i = 0; i < std::min(beam_rows.size(), mybeam_rows.size()); ++i) {
      const auto& b = beam_rows[i];
      const auto& m = mybeam_rows[i];
      csv << sc.seed << ',' << b[0];
      for (std::size_t col = 2; col < 6; ++col) csv << ',' << b[col] << ',' << m[col];
      csv << '\n';
    }
    out.seeds.push_back(std::move(sc));
  }
  for (const auto& sc : out.seeds) {
    csv << "# seed=" << sc.seed << " beam_coverage_pct=" << format_metric(sc.beam.summary.final_coverage_pct)
        << " mybeam_coverage_pct=" << format_metric(sc.mybeam.summary.final_coverage_pct)
        << " delta=" << format_metric(sc.coverage_delta)
        << " mybeam_ge_beam=" << (sc.coverage_delta ? (*sc.coverage_delta >= 0.0 ? "true" : "false") : "n/a");
    for (const char* stream : {"mobility", "join-willingness"}) {
      const auto b = sc.beam.rng_draws.find(stream);
      const auto m = sc.mybeam.rng_draws.find(stream);
      const bool same = b != sc.beam.rng_draws.end() && m != sc.mybeam.rng_draws.end() && b->second == m->second;
      csv << ' ' << stream << "_draws_equal=" << (same ? "true" : "false");
    }
    csv << '\n';
  }
  out.csv = csv.str();
  if (out_dir) {
    make_dir(*out_dir);
    write_file(*out_dir / kComparisonFile, out.csv);
  }
  return out;
}

}  // namespace beamsim
