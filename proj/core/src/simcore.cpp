#include "beamsim/simcore.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

namespace beamsim {

void EventQueue::schedule(SimTime fire_at, EventKind kind, EventPayload payload) {
  if (fire_at < now_) {
    throw SchedulingError("event at " + format_time(fire_at) + " precedes clock " +
                          format_time(now_));
  }
  heap_.push(Event{fire_at, next_seq_++, kind, std::move(payload)});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  now_ = e.fire_at;
  return e;
}

const char* to_string(DeliveryStatus s) {
  switch (s) {
    case DeliveryStatus::Delivered:
      return "delivered";
    case DeliveryStatus::Lost:
      return "lost";
    case DeliveryStatus::OutOfRange:
      return "range";
    case DeliveryStatus::Down:
      return "down";
  }
  return "?";
}

Channel::Channel(ChannelModel model, std::uint64_t seed)
    : model_(model), loss_rng_(seed, "channel-loss"), jitter_rng_(seed, "jitter") {}

TransmitOutcome Channel::reach(const Position& from, NodeId to, const Position& to_pos,
                               SimTime now) {
  TransmitOutcome o;
  o.recipient = to;
  o.distance = euclidean_distance(from, to_pos);
  const bool lost = loss_rng_.bernoulli(model_.loss_probability);
  const std::int64_t j = jitter_rng_.uniform_int(-model_.jitter.us, model_.jitter.us);
  if (lost) {
    o.status = DeliveryStatus::Lost;
    return o;
  }
  o.arrival = now + model_.base_latency + SimTime::from_us(j);
  if (o.arrival < now) o.arrival = now;
  return o;
}

TransmitResult Channel::transmit(const Position& sender_pos, const Message& msg, SimTime now,
                                 const NodeDirectory& directory) {
  TransmitResult result;
  if (msg.target) {
    const NodeId to = *msg.target;
    if (!directory.known(to)) {
      result.route_error = true;
      return result;
    }
    const auto pos = directory.locate(to);
    if (!pos) {
      result.outcomes.push_back({to, DeliveryStatus::Down, {}, 0.0});
      return result;
    }
    const double d = euclidean_distance(sender_pos, *pos);
    if (d > model_.range) {
      result.outcomes.push_back({to, DeliveryStatus::OutOfRange, {}, d});
      return result;
    }
    result.outcomes.push_back(reach(sender_pos, to, *pos, now));
    return result;
  }

  for (const NodeId n : directory.nodes()) {
    if (n == msg.sender) continue;
    const auto pos = directory.locate(n);
    if (!pos) continue;
    if (euclidean_distance(sender_pos, *pos) > model_.range) continue;
    result.outcomes.push_back(reach(sender_pos, n, *pos, now));
  }
  return result;
}

void EventLog::record(SimTime t, std::string_view kind, std::string_view node,
                      std::string_view detail) {
  std::string line = format_time(t);
  line.reserve(line.size() + kind.size() + node.size() + detail.size() + 3);
  line += '|';
  line += kind;
  line += '|';
  line += node;
  line += '|';
  line += detail;
  lines_.push_back(std::move(line));
}

void EventLog::write(std::ostream& out) const {
  for (const auto& l : lines_) out << l << '\n';
}

std::string EventLog::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::optional<std::string_view> LogRecord::field(std::string_view key) const {
  std::string_view d = detail;
  std::size_t pos = 0;
  while (pos < d.size()) {
    std::size_t end = d.find(' ', pos);
    if (end == std::string_view::npos) end = d.size();
    const std::string_view tok = d.substr(pos, end - pos);
    if (tok.size() > key.size() && tok.substr(0, key.size()) == key && tok[key.size()] == '=') {
      return tok.substr(key.size() + 1);
    }
    pos = end + 1;
  }
  return std::nullopt;
}

std::optional<SimTime> parse_time(std::string_view ts) {
  const std::size_t dot = ts.find('.');
  if (dot == std::string_view::npos || ts.size() - dot - 1 != 6) return std::nullopt;
  const auto parse = [](std::string_view s, std::int64_t& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size() && out >= 0;
  };
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  if (!parse(ts.substr(0, dot), whole) || !parse(ts.substr(dot + 1), frac)) return std::nullopt;
  return SimTime::from_us(whole * 1'000'000 + frac);
}

LogRecord parse_log_line(std::string_view line, std::size_t lineno) {
  LogRecord r;
  std::size_t a = line.find('|');
  std::size_t b = a == std::string_view::npos ? a : line.find('|', a + 1);
  std::size_t c = b == std::string_view::npos ? b : line.find('|', b + 1);
  if (c == std::string_view::npos) throw ParseError(lineno, "malformed log record");
  const auto time = parse_time(line.substr(0, a));
  if (!time) throw ParseError(lineno, "bad timestamp in log record");
  r.time = *time;
  r.kind = std::string(line.substr(a + 1, b - a - 1));
  r.node = std::string(line.substr(b + 1, c - b - 1));
  r.detail = std::string(line.substr(c + 1));
  return r;
}

}  // namespace beamsim
