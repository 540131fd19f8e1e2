// beamsim command-line front end: simulate, compare, validate-trace.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "beamsim/mobility.hpp"
#include "beamsim/scenario.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInvalid = 2, kIo = 3 };

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw beamsim::ValidationError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw beamsim::ValidationError("--seeds needs at least one seed");
  return seeds;
}

void print_summary(const beamsim::RunReport& r) {
  const auto& s = r.summary;
  std::printf("%s seed=%llu digest=%s throughput_kbps=%s pdr_pct=%s delay_ms=%s coverage_pct=%s\n",
              beamsim::to_string(r.protocol), static_cast<unsigned long long>(r.seed),
              r.digest.c_str(), beamsim::format_metric(s.mean_throughput_kbps).c_str(),
              beamsim::format_metric(s.final_pdr_pct).c_str(),
              beamsim::format_metric(s.mean_delay_ms).c_str(),
              beamsim::format_metric(s.final_coverage_pct).c_str());
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const beamsim::IoError& e) {
    std::cerr << "beamsim: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const beamsim::ValidationError& e) {
    std::cerr << "beamsim: invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const beamsim::ParseError& e) {
    std::cerr << "beamsim: parse error: " << e.what() << "\n";
    return kInvalid;
  } catch (const beamsim::OrderingError& e) {
    std::cerr << "beamsim: invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const beamsim::UnknownVehicle& e) {
    std::cerr << "beamsim: invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "beamsim: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered VANET emergency dissemination simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string protocol;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario");
  simulate->add_option("--config", config_path, "Scenario file")->required();
  simulate->add_option("--protocol", protocol, "beam or mybeam")->check(CLI::IsMember({"beam", "mybeam"}));
  simulate->add_option("--seed", seed, "Run seed");
  simulate->add_option("--out", out_dir, "Output directory");

  std::string seeds_text;
  auto* cmp = app.add_subcommand("compare", "Run both protocols over several seeds");
  cmp->add_option("--config", config_path, "Scenario file")->required();
  cmp->add_option("--seeds", seeds_text, "Comma-separated seeds")->required();
  cmp->add_option("--out", out_dir, "Output directory")->required();

  std::string trace_path;
  auto* vt = app.add_subcommand("validate-trace", "Check a mobility trace file");
  vt->add_option("path", trace_path, "Trace CSV")->required();

  CLI11_PARSE(app, argc, argv);

  if (*simulate) {
    return guarded([&] {
      beamsim::ScenarioConfig cfg = beamsim::load_config(config_path);
      if (!protocol.empty()) cfg.protocol = *beamsim::parse_protocol(protocol);
      if (seed) cfg.seed = *seed;
      std::optional<std::filesystem::path> out;
      if (!out_dir.empty()) out = out_dir;
      const auto report = beamsim::run_scenario(cfg, out);
      print_summary(report);
      if (!out) std::cout << report.metrics_csv;
    });
  }
  if (*cmp) {
    return guarded([&] {
      const auto cfg = beamsim::load_config(config_path);
      const auto report = beamsim::compare(cfg, parse_seeds(seeds_text), std::filesystem::path(out_dir));
      for (const auto& s : report.seeds) {
        print_summary(s.beam);
        print_summary(s.mybeam);
      }
      std::cout << "wrote " << (std::filesystem::path(out_dir) / beamsim::kComparisonFile).string() << "\n";
    });
  }
  return guarded([&] {
    std::ifstream in(trace_path);
    if (!in) throw beamsim::IoError("cannot read trace " + trace_path);
    const auto model = beamsim::load_trace(in);
    const auto& samples = model.samples();
    double t0 = samples.front().time;
    double t1 = samples.front().time;
    for (const auto& s : samples) {
      t0 = std::min(t0, s.time);
      t1 = std::max(t1, s.time);
    }
    std::printf("ok: %zu samples, %zu vehicles, t in [%g, %g] s\n", samples.size(),
                model.vehicle_count(), t0, t1);
  });
}
