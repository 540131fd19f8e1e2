#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/protocol.hpp"

namespace beamsim {

struct SendEntry {
  std::uint64_t packet = 0;  // one per intended recipient
  std::uint64_t msg_id = 0;
  MessageKind kind = MessageKind::JoinControl;
  SimTime t_send;
  std::uint32_t size = 0;  // bytes
  std::string from;
  std::string to;
};

struct ReceiveEntry {
  std::uint64_t packet = 0;
  std::uint64_t msg_id = 0;
  MessageKind kind = MessageKind::JoinControl;
  std::string recipient;
  SimTime t_send;
  SimTime t_recv;
  std::uint32_t size = 0;
};

// Everything the metrics need, pulled out of one run's event log.
struct MetricsLedger {
  std::string protocol;
  SimTime horizon;
  std::vector<std::string> population;       // vehicle names
  std::vector<SendEntry> sends;              // log order
  std::vector<ReceiveEntry> receives;        // log order
  std::vector<std::uint64_t> emergencies;    // detected EmergencyMsg ids, in order
  std::size_t unsendable = 0;

  std::optional<std::uint64_t> first_emergency() const;
};

// Throws ParseError for malformed lines and ValidationError when a delivery
// has no matching send.
MetricsLedger build_ledger(const std::vector<std::string>& lines);
MetricsLedger read_ledger(std::istream& in);

// Windows are half-open [start, stop) over simulated time.

// Received bytes * 8 / (stop - start) / 1000. PreconditionError unless stop > start.
double throughput_kbps(const MetricsLedger& ledger, SimTime start, SimTime stop);
// 100 * delivered / sent over sends issued in the window; empty without sends.
std::optional<double> pdr_pct(const MetricsLedger& ledger, SimTime start, SimTime stop);
// Mean delivery latency of receptions in the window, in ms; empty without receptions.
std::optional<double> avg_delay_ms(const MetricsLedger& ledger, SimTime start, SimTime stop);
// Share of the population that received msg_id at or before t. UnknownMessage
// if msg_id was never emitted as an emergency.
double emergency_coverage(const MetricsLedger& ledger, std::uint64_t msg_id, SimTime t);

struct MetricsSample {
  SimTime t;  // window end
  double throughput_kbps = 0.0;
  std::optional<double> pdr_pct;
  std::optional<double> avg_delay_ms;
  std::optional<double> coverage_pct;
};

inline constexpr const char* kMetricsHeader =
    "t_s,protocol,throughput_kbps,pdr_pct,avg_delay_ms,coverage_pct";

// One sample per window of `width` up to the horizon; the last window is
// clipped to the horizon.
std::vector<MetricsSample> metrics_series(const MetricsLedger& ledger, SimTime width);
void write_series(std::ostream& out, const std::string& protocol,
                  const std::vector<MetricsSample>& series);
// Fixed-precision field text; empty for an absent value.
std::string format_metric(const std::optional<double>& v);

struct RunSummary {
  double mean_throughput_kbps = 0.0;
  std::optional<double> final_pdr_pct;
  std::optional<double> mean_delay_ms;
  std::optional<double> final_coverage_pct;
  std::size_t sends = 0;
  std::size_t receives = 0;
  std::size_t unsendable = 0;
};

RunSummary summarize(const MetricsLedger& ledger);

}  // namespace beamsim
