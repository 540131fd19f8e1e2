#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "fixtures.hpp"

namespace {

// Runs the beamsim binary, stdout to `out`, stderr dropped. Returns the exit code.
int run(const std::string& args, const std::filesystem::path& out) {
  const std::string cmd = std::string("\"") + BEAMSIM_CLI + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, SimulatePrintsSummaryAndSeries) {
  fixtures::TempDir dir("cli-ok");
  fixtures::write_text(dir / "s.cfg", "horizon = 30\nseed = 5\n");
  EXPECT_EQ(run("simulate --config \"" + (dir / "s.cfg").string() + "\" --protocol beam", dir / "stdout"), 0);
  const auto text = fixtures::read_text(dir / "stdout");
  EXPECT_EQ(text.rfind("beam seed=5 digest=", 0), 0u) << text;
  EXPECT_NE(text.find("t_s,protocol,throughput_kbps"), std::string::npos);
}

TEST(Cli, SimulateWithOutIsByteIdentical) {
  fixtures::TempDir dir("cli-out");
  fixtures::write_text(dir / "s.cfg", "horizon = 40\n");
  const std::string cfg = "\"" + (dir / "s.cfg").string() + "\"";
  ASSERT_EQ(run("simulate --config " + cfg + " --seed 9 --out \"" + (dir / "a").string() + "\"", dir / "o1"), 0);
  ASSERT_EQ(run("simulate --config " + cfg + " --seed 9 --out \"" + (dir / "b").string() + "\"", dir / "o2"), 0);
  for (const char* f : {"events.log", "metrics.csv", "report.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
  }
  EXPECT_EQ(fixtures::read_text(dir / "a" / "events.log"), fixtures::read_text(dir / "b" / "events.log"));
  EXPECT_EQ(fixtures::read_text(dir / "a" / "metrics.csv"), fixtures::read_text(dir / "b" / "metrics.csv"));
  EXPECT_EQ(fixtures::read_text(dir / "o1"), fixtures::read_text(dir / "o2"));
}

TEST(Cli, InvalidInputExitsTwo) {
  fixtures::TempDir dir("cli-bad");
  fixtures::write_text(dir / "neg.cfg", "range_C = -5\n");
  fixtures::write_text(dir / "key.cfg", "bogus = 1\n");
  fixtures::write_text(dir / "bad.csv", "time_s,vehicle_id,x_m,y_m,speed_mps,heading_deg\n1,v1,0,0,0,0\n0,v1,0,0,0,0\n");
  EXPECT_EQ(run("simulate --config \"" + (dir / "neg.cfg").string() + "\"", dir / "o"), 2);
  EXPECT_EQ(run("simulate --config \"" + (dir / "key.cfg").string() + "\"", dir / "o"), 2);
  EXPECT_EQ(run("validate-trace \"" + (dir / "bad.csv").string() + "\"", dir / "o"), 2);
}

TEST(Cli, MissingFileExitsThree) {
  fixtures::TempDir dir("cli-io");
  EXPECT_EQ(run("simulate --config \"" + (dir / "nope.cfg").string() + "\"", dir / "o"), 3);
  EXPECT_EQ(run("validate-trace \"" + (dir / "nope.csv").string() + "\"", dir / "o"), 3);
}

TEST(Cli, ValidateTraceAcceptsGoodTrace) {
  fixtures::TempDir dir("cli-vt");
  fixtures::write_text(dir / "t.csv", fixtures::parked_trio_trace(20.0));
  EXPECT_EQ(run("validate-trace \"" + (dir / "t.csv").string() + "\"", dir / "o"), 0);
  EXPECT_EQ(fixtures::read_text(dir / "o").rfind("ok: 6 samples, 3 vehicles", 0), 0u);
}
