#include "beamsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "beamsim/simcore.hpp"

namespace beamsim {

namespace {

template <typename T>
T field_num(const LogRecord& r, std::string_view key, std::size_t lineno) {
  const auto v = r.field(key);
  if (!v) throw ParseError(lineno, "missing '" + std::string(key) + "' in " + r.kind + " record");
  T out{};
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size()) {
    throw ParseError(lineno, "bad '" + std::string(key) + "' in " + r.kind + " record");
  }
  return out;
}

std::string field_str(const LogRecord& r, std::string_view key, std::size_t lineno) {
  const auto v = r.field(key);
  if (!v) throw ParseError(lineno, "missing '" + std::string(key) + "' in " + r.kind + " record");
  return std::string(*v);
}

MessageKind field_kind(const LogRecord& r, std::size_t lineno) {
  const auto k = parse_message_kind(field_str(r, "kind", lineno));
  if (!k) throw ParseError(lineno, "unknown message kind");
  return *k;
}

bool in_window(SimTime t, SimTime start, SimTime stop) { return t >= start && t < stop; }

std::vector<std::uint64_t> received_packets(const MetricsLedger& ledger) {
  std::vector<std::uint64_t> out;
  out.reserve(ledger.receives.size());
  for (const auto& r : ledger.receives) out.push_back(r.packet);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> pdr_with(const MetricsLedger& ledger, SimTime start, SimTime stop,
                               const std::vector<std::uint64_t>& received) {
  std::uint64_t sent = 0;
  std::uint64_t got = 0;
  for (const auto& s : ledger.sends) {
    if (!in_window(s.t_send, start, stop)) continue;
    ++sent;
    if (std::binary_search(received.begin(), received.end(), s.packet)) ++got;
  }
  if (sent == 0) return std::nullopt;
  return 100.0 * static_cast<double>(got) / static_cast<double>(sent);
}

}  // namespace

std::optional<std::uint64_t> MetricsLedger::first_emergency() const {
  if (emergencies.empty()) return std::nullopt;
  return emergencies.front();
}

MetricsLedger build_ledger(const std::vector<std::string>& lines) {
  MetricsLedger ledger;
  std::map<std::uint64_t, std::size_t> by_packet;  // packet -> index into sends
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    const LogRecord r = parse_log_line(line, lineno);
    if (r.kind == "send") {
      SendEntry s;
      s.packet = field_num<std::uint64_t>(r, "pkt", lineno);
      s.msg_id = field_num<std::uint64_t>(r, "msg", lineno);
      s.kind = field_kind(r, lineno);
      s.t_send = r.time;
      s.size = field_num<std::uint32_t>(r, "size", lineno);
      s.from = r.node;
      s.to = field_str(r, "to", lineno);
      by_packet[s.packet] = ledger.sends.size();
      ledger.sends.push_back(std::move(s));
    } else if (r.kind == "deliver") {
      const auto pkt = field_num<std::uint64_t>(r, "pkt", lineno);
      const auto it = by_packet.find(pkt);
      if (it == by_packet.end()) {
        throw ValidationError("line " + std::to_string(lineno) + ": delivery of unsent packet " +
                              std::to_string(pkt));
      }
      const SendEntry& s = ledger.sends[it->second];
      if (r.time < s.t_send) {
        throw ValidationError("line " + std::to_string(lineno) + ": delivery precedes its send");
      }
      ledger.receives.push_back({pkt, s.msg_id, s.kind, r.node, s.t_send, r.time, s.size});
    } else if (r.kind == "detect") {
      ledger.emergencies.push_back(field_num<std::uint64_t>(r, "msg", lineno));
    } else if (r.kind == "node") {
      if (field_str(r, "kind", lineno) == "vehicle") ledger.population.push_back(r.node);
    } else if (r.kind == "init") {
      ledger.protocol = field_str(r, "protocol", lineno);
      const auto h = parse_time(field_str(r, "horizon", lineno));
      if (!h) throw ParseError(lineno, "bad horizon in init record");
      ledger.horizon = *h;
    } else if (r.kind == "unsendable") {
      ++ledger.unsendable;
    }
  }
  return ledger;
}

MetricsLedger read_ledger(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return build_ledger(lines);
}

double throughput_kbps(const MetricsLedger& ledger, SimTime start, SimTime stop) {
  if (!(stop > start)) throw PreconditionError("throughput window needs stop > start");
  std::uint64_t bytes = 0;
  for (const auto& r : ledger.receives) {
    if (in_window(r.t_recv, start, stop)) bytes += r.size;
  }
  return static_cast<double>(bytes) * 8.0 / (stop - start).seconds() / 1000.0;
}

std::optional<double> pdr_pct(const MetricsLedger& ledger, SimTime start, SimTime stop) {
  return pdr_with(ledger, start, stop, received_packets(ledger));
}

std::optional<double> avg_delay_ms(const MetricsLedger& ledger, SimTime start, SimTime stop) {
  std::int64_t total_us = 0;
  std::uint64_t n = 0;
  for (const auto& r : ledger.receives) {
    if (!in_window(r.t_recv, start, stop)) continue;
    total_us += (r.t_recv - r.t_send).us;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(total_us) / 1000.0 / static_cast<double>(n);
}

double emergency_coverage(const MetricsLedger& ledger, std::uint64_t msg_id, SimTime t) {
  if (std::find(ledger.emergencies.begin(), ledger.emergencies.end(), msg_id) ==
      ledger.emergencies.end()) {
    throw UnknownMessage("emergency message " + std::to_string(msg_id) + " was never emitted");
  }
  if (ledger.population.empty()) throw EmptyPopulation("no vehicles in the log");
  const std::set<std::string> population(ledger.population.begin(), ledger.population.end());
  std::set<std::string> reached;
  for (const auto& r : ledger.receives) {
    if (r.msg_id == msg_id && r.t_recv <= t && population.contains(r.recipient)) {
      reached.insert(r.recipient);
    }
  }
  return 100.0 * static_cast<double>(reached.size()) / static_cast<double>(population.size());
}

std::vector<MetricsSample> metrics_series(const MetricsLedger& ledger, SimTime width) {
  if (width.us <= 0) throw PreconditionError("window width must be positive");
  std::vector<MetricsSample> out;
  const auto first = ledger.first_emergency();
  const auto received = received_packets(ledger);
  for (SimTime start; start < ledger.horizon; start += width) {
    const SimTime stop = std::min(start + width, ledger.horizon);
    MetricsSample s;
    s.t = stop;
    s.throughput_kbps = throughput_kbps(ledger, start, stop);
    s.pdr_pct = pdr_with(ledger, start, stop, received);
    s.avg_delay_ms = avg_delay_ms(ledger, start, stop);
    if (first) s.coverage_pct = emergency_coverage(ledger, *first, stop);
    out.push_back(s);
  }
  return out;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

void write_series(std::ostream& out, const std::string& protocol,
                  const std::vector<MetricsSample>& series) {
  out << kMetricsHeader << '\n';
  for (const auto& s : series) {
    out << format_time(s.t) << ',' << protocol << ',' << format_metric(s.throughput_kbps) << ','
        << format_metric(s.pdr_pct) << ',' << format_metric(s.avg_delay_ms) << ','
        << format_metric(s.coverage_pct) << '\n';
  }
}

RunSummary summarize(const MetricsLedger& ledger) {
  RunSummary s;
  const SimTime end = ledger.horizon;
  if (end.us > 0) s.mean_throughput_kbps = throughput_kbps(ledger, SimTime{}, end);
  const SimTime after_end = end + SimTime::from_us(1);
  s.final_pdr_pct = pdr_pct(ledger, SimTime{}, after_end);
  s.mean_delay_ms = avg_delay_ms(ledger, SimTime{}, after_end);
  if (const auto first = ledger.first_emergency()) {
    s.final_coverage_pct = emergency_coverage(ledger, *first, end);
  }
  s.sends = ledger.sends.size();
  s.receives = ledger.receives.size();
  s.unsendable = ledger.unsendable;
  return s;
}

}  // namespace beamsim
