#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "beamsim/scenario.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace beamsim;

namespace {

ScenarioConfig short_config(Protocol p, std::uint64_t seed) {
  ScenarioConfig c;
  c.protocol = p;
  c.seed = seed;
  c.horizon = 120.0;
  return c;
}

// Random but valid configuration.
ScenarioConfig random_config(gen::Gen& g) {
  ScenarioConfig c;
  c.area_width = g.real(500.0, 4000.0);
  c.area_height = g.real(500.0, 3000.0);
  c.rsu_positions.clear();
  const auto rsus = g.integer(1, 4);
  for (int i = 0; i < rsus; ++i) c.rsu_positions.push_back({g.real(0.0, c.area_width), g.real(0.0, c.area_height)});
  c.range_c = g.real(50.0, 600.0);
  c.vehicle_count = static_cast<std::uint32_t>(g.integer(1, 60));
  c.speed_min_kmh = g.real(0.0, 80.0);
  c.speed_max_kmh = c.speed_min_kmh + g.real(0.0, 80.0);
  c.threshold_speed_kmh = g.real(10.0, 150.0);
  c.timer_periodic = g.real(0.1, 5.0);
  c.timer_status = g.real(0.1, 5.0);
  c.timer_life = g.real(1.0, 60.0);
  c.timer_ack = g.real(0.1, 3.0);
  c.delta_deg = g.real(0.0, 180.0);
  c.max_attempts = static_cast<int>(g.integer(0, 6));
  c.channel_base_latency = g.real(0.0, 0.01);
  c.channel_jitter = g.real(0.0, c.channel_base_latency);
  c.channel_loss_probability = g.real(0.0, 1.0);
  c.mobility_lanes = {g.real(0.0, c.area_height), g.real(0.0, c.area_height)};
  c.emergencies.clear();
  for (int i = 0, n = static_cast<int>(g.integer(0, 3)); i < n; ++i) {
    c.emergencies.push_back({"v" + std::to_string(g.integer(1, 9)), g.real(0.0, 400.0),
                             g.coin(0.5) ? EmergencyKind::SpeedSpike : EmergencyKind::YawSpike,
                             g.real(0.0, 90.0)});
  }
  for (int i = 0, n = static_cast<int>(g.integer(0, 3)); i < n; ++i) {
    c.failures.push_back({"v" + std::to_string(g.integer(1, 9)), g.real(0.0, 400.0)});
  }
  c.join_probability = g.real(0.0, 1.0);
  c.detect_decrease = g.coin(0.5);
  c.seed = static_cast<std::uint64_t>(g.integer(0, 1'000'000'000));
  c.horizon = g.real(0.0, 1000.0);
  c.protocol = g.coin(0.5) ? Protocol::Beam : Protocol::MyBeam;
  c.tick = g.real(0.01, 1.0);
  c.status_phase = g.real(0.0, 1.0);
  c.metrics_window = g.real(0.1, 10.0);
  return c;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config_text("");
  EXPECT_EQ(c, ScenarioConfig{});
  EXPECT_DOUBLE_EQ(c.area_width, 2850.46);
  EXPECT_DOUBLE_EQ(c.area_height, 2000.04);
  EXPECT_EQ(c.vehicle_count, 25u);
  ASSERT_EQ(c.rsu_positions.size(), 2u);
  EXPECT_DOUBLE_EQ(c.rsu_positions[1].x, 1200.0);
  EXPECT_DOUBLE_EQ(c.range_c, 300.0);
  EXPECT_DOUBLE_EQ(c.speed_min_kmh, 80.0);
  EXPECT_DOUBLE_EQ(c.speed_max_kmh, 120.0);
  EXPECT_DOUBLE_EQ(c.threshold_speed_kmh, 100.0);
  EXPECT_DOUBLE_EQ(c.horizon, 500.0);
}

TEST(Config, OverridesAndComments) {
  const auto c = parse_config_text(
      "# comment\n"
      "protocol = beam   # trailing\n"
      "\n"
      "rsu.positions = 10:20, 30:40\n"
      "failures = v3@12.5\n"
      "detect_decrease = true\n");
  EXPECT_EQ(c.protocol, Protocol::Beam);
  ASSERT_EQ(c.rsu_positions.size(), 2u);
  EXPECT_DOUBLE_EQ(c.rsu_positions[1].y, 40.0);
  ASSERT_EQ(c.failures.size(), 1u);
  EXPECT_EQ(c.failures[0].vehicle, "v3");
  EXPECT_DOUBLE_EQ(c.failures[0].at, 12.5);
  EXPECT_TRUE(c.detect_decrease);
}

TEST(Config, EmptyEmergencyListMeansNone) {
  EXPECT_TRUE(parse_config_text("emergencies =\n").emergencies.empty());
  const auto c = parse_config_text("emergencies = v2@50:yaw-spike:40, nearest-rsu@60:speed-spike:0.5\n");
  ASSERT_EQ(c.emergencies.size(), 2u);
  EXPECT_EQ(c.emergencies[0].kind, EmergencyKind::YawSpike);
  EXPECT_EQ(c.emergencies[1].vehicle, kNearestRsu);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_text("range_C = -5\n"), ValidationError);
  EXPECT_THROW(parse_config_text("range_C = abc\n"), ValidationError);
  EXPECT_THROW(parse_config_text("no_such_key = 1\n"), ValidationError);
  EXPECT_THROW(parse_config_text("seed = 1\nseed = 2\n"), ValidationError);
  EXPECT_THROW(parse_config_text("channel.jitter = 0.005\n"), ValidationError);
  EXPECT_THROW(parse_config_text("protocol = flood\n"), ValidationError);
  EXPECT_THROW(parse_config_text("emergencies = v1@10:melt:1\n"), ValidationError);
  EXPECT_THROW(parse_config_text("mobility.mode = trace\n"), ValidationError);
  try {
    parse_config_text("seed = 1\nthis line has no equals\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Config, SerializeRoundTripsDefaults) {
  const ScenarioConfig c;
  EXPECT_EQ(parse_config_text(serialize(c)), c);
}

TEST(Config, SerializeRoundTripsRandomConfigs) {
  gen::Gen g(61);
  for (int i = 0; i < 300; ++i) {
    const auto c = random_config(g);
    ASSERT_NO_THROW(validate(c));
    const auto text = serialize(c);
    EXPECT_EQ(parse_config_text(text), c) << text;
    EXPECT_EQ(serialize(parse_config_text(text)), text);
  }
}

TEST(Config, DigestIgnoresLayout) {
  const auto a = parse_config_text("seed = 7\nprotocol = beam\nhorizon = 100\n");
  const auto b = parse_config_text("# same thing\nhorizon=100\n\nprotocol = beam\n  seed = 7  \n");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  auto c = a;
  c.seed = 8;
  EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Config, LoadResolvesRelativeTrace) {
  fixtures::TempDir dir("cfg");
  std::filesystem::create_directories(dir / "traces");
  fixtures::write_text(dir / "traces" / "t.csv", fixtures::parked_trio_trace(30.0));
  fixtures::write_text(dir / "s.cfg", "mobility.mode = trace\nmobility.trace = traces/t.csv\n");
  const auto c = load_config(dir / "s.cfg");
  EXPECT_EQ(std::filesystem::path(c.mobility_trace), dir / "traces" / "t.csv");
  EXPECT_THROW(load_config(dir / "missing.cfg"), IoError);
}

TEST(RunScenario, SameConfigSameBytes) {
  const auto c = short_config(Protocol::MyBeam, 3);
  const auto a = run_scenario(c);
  const auto b = run_scenario(c);
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_EQ(a.event_log, b.event_log);
  EXPECT_EQ(a.metrics_csv, b.metrics_csv);
  EXPECT_FALSE(a.event_log.empty());
  EXPECT_TRUE(a.files.empty());
}

TEST(RunScenario, TraceBackedRun) {
  fixtures::TempDir dir("trace-run");
  fixtures::write_text(dir / "t.csv", fixtures::parked_trio_trace(40.0));
  ScenarioConfig c;
  c.mobility_mode = "trace";
  c.mobility_trace = (dir / "t.csv").string();
  c.rsu_positions = {{200.0, 200.0}};
  c.horizon = 30.0;
  c.emergencies = {{"v1", 10.0, EmergencyKind::YawSpike, 45.0}};
  const auto r = run_scenario(c);
  EXPECT_NE(r.event_log.find("subject=v1"), std::string::npos);
  ASSERT_TRUE(r.summary.final_coverage_pct);
  EXPECT_DOUBLE_EQ(*r.summary.final_coverage_pct, 100.0);
}

TEST(RunScenario, WritesOutputs) {
  fixtures::TempDir dir("out");
  auto c = short_config(Protocol::Beam, 2);
  c.horizon = 20.0;
  const auto r = run_scenario(c, dir / "run");
  ASSERT_EQ(r.files.size(), 3u);
  EXPECT_EQ(fixtures::read_text(dir / "run" / kEventLogFile), r.event_log);
  EXPECT_EQ(fixtures::read_text(dir / "run" / kMetricsFile), r.metrics_csv);
  const auto json = fixtures::read_text(dir / "run" / kReportFile);
  EXPECT_NE(json.find("\"digest\": \"" + r.digest + "\""), std::string::npos);
}

TEST(Compare, WritesEveryRunAndTheTable) {
  fixtures::TempDir dir("cmp");
  ScenarioConfig c;
  c.horizon = 120.0;
  const auto rep = compare(c, {1, 2, 3}, dir.path());
  ASSERT_EQ(rep.seeds.size(), 3u);
  for (std::uint64_t s : {1, 2, 3}) {
    for (const char* p : {"beam", "mybeam"}) {
      const auto run = dir / (std::string(p) + "-seed" + std::to_string(s));
      EXPECT_TRUE(std::filesystem::exists(run / kEventLogFile)) << run;
      EXPECT_TRUE(std::filesystem::exists(run / kMetricsFile));
      EXPECT_TRUE(std::filesystem::exists(run / kReportFile));
    }
  }
  const auto table = fixtures::read_text(dir / kComparisonFile);
  EXPECT_EQ(table, rep.csv);
  std::istringstream in(table);
  std::string line;
  int footers = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("# seed=", 0) == 0) {
      ++footers;
      EXPECT_NE(line.find("mobility_draws_equal=true"), std::string::npos) << line;
      EXPECT_NE(line.find("join-willingness_draws_equal=true"), std::string::npos) << line;
    } else {
      ++rows;
    }
  }
  EXPECT_EQ(footers, 3);
  EXPECT_EQ(rows, 1 + 3 * 120u);
  for (const auto& s : rep.seeds) {
    EXPECT_EQ(s.beam.protocol, Protocol::Beam);
    EXPECT_EQ(s.mybeam.protocol, Protocol::MyBeam);
    EXPECT_TRUE(s.beam.event_log.empty());  // dropped after writing to keep memory flat
  }
}

TEST(Compare, NeedsSeeds) {
  EXPECT_THROW(compare(ScenarioConfig{}, {}), PreconditionError);
}
