#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/geometry.hpp"
#include "beamsim/protocol.hpp"
#include "beamsim/random.hpp"

namespace beamsim {

enum class EventKind { TimerMaturity, MessageDelivery, MobilityRefresh, EmergencyInjection };

enum class TimerName { Periodic, Status, Ack, Life };

struct TimerPayload {
  TimerName name = TimerName::Periodic;
  NodeId node;               // owner
  NodeId peer;               // ack: recipient; life: member vehicle
  std::uint64_t msg_id = 0;  // ack only
  SimTime deadline;          // life only
};

struct DeliveryPayload {
  Message msg;
  NodeId recipient;
  std::uint64_t packet_id = 0;
  SimTime sent_at;
};

struct InjectionPayload {
  std::size_t index = 0;  // into the simulation's injection list
};

using EventPayload = std::variant<std::monostate, TimerPayload, DeliveryPayload, InjectionPayload>;

struct Event {
  SimTime fire_at;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::TimerMaturity;
  EventPayload payload;
};

// Min-queue on (fire_at, seq); equal times fire in scheduling order.
class EventQueue {
 public:
  // Throws SchedulingError for fire_at < now().
  void schedule(SimTime fire_at, EventKind kind, EventPayload payload = {});
  bool empty() const { return heap_.empty(); }
  const Event& top() const { return heap_.top(); }
  // Removes the earliest event and advances the clock to it.
  Event pop();
  SimTime now() const { return now_; }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  SimTime now_;
};

struct ChannelModel {
  double range = 300.0;  // meters
  SimTime base_latency = SimTime::from_us(2'000);
  SimTime jitter = SimTime::from_us(1'000);  // uniform half-width
  double loss_probability = 0.0;
};

// Where nodes are and whether they can receive. Implemented by the simulation.
class NodeDirectory {
 public:
  virtual ~NodeDirectory() = default;
  virtual bool known(NodeId n) const = 0;
  // Position of a node able to receive right now; empty if it is down.
  virtual std::optional<Position> locate(NodeId n) const = 0;
  // Every node, in NodeId order.
  virtual std::vector<NodeId> nodes() const = 0;
};

enum class DeliveryStatus { Delivered, Lost, OutOfRange, Down };
const char* to_string(DeliveryStatus s);

struct TransmitOutcome {
  NodeId recipient;
  DeliveryStatus status = DeliveryStatus::Delivered;
  SimTime arrival;  // Delivered only
  double distance = 0.0;
};

struct TransmitResult {
  std::vector<TransmitOutcome> outcomes;  // one per intended recipient
  bool route_error = false;               // unicast to an unknown node
};

// Unit-disk radio. Every in-range recipient consumes one loss draw and one
// jitter draw so the streams stay aligned regardless of outcomes.
class Channel {
 public:
  Channel(ChannelModel model, std::uint64_t seed);

  TransmitResult transmit(const Position& sender_pos, const Message& msg, SimTime now,
                          const NodeDirectory& directory);

  const ChannelModel& model() const { return model_; }
  std::uint64_t loss_draws() const { return loss_rng_.draws(); }
  std::uint64_t jitter_draws() const { return jitter_rng_.draws(); }

 private:
  TransmitOutcome reach(const Position& from, NodeId to, const Position& to_pos, SimTime now);

  ChannelModel model_;
  RandomStream loss_rng_;
  RandomStream jitter_rng_;
};

// Append-only `t_s|event_kind|node|detail` records.
class EventLog {
 public:
  void record(SimTime t, std::string_view kind, std::string_view node, std::string_view detail);
  const std::vector<std::string>& lines() const { return lines_; }
  void write(std::ostream& out) const;
  std::string str() const;
  std::size_t size() const { return lines_.size(); }

 private:
  std::vector<std::string> lines_;
};

// Inverse of format_time; empty unless the text is `seconds.micros` with
// exactly six fractional digits.
std::optional<SimTime> parse_time(std::string_view s);

// One parsed log line.
struct LogRecord {
  SimTime time;
  std::string kind;
  std::string node;
  std::string detail;

  // Value of `key=` in the detail field, if present.
  std::optional<std::string_view> field(std::string_view key) const;
};

// Throws ParseError on a line that is not four `|`-separated fields with a
// `seconds.micros` timestamp.
LogRecord parse_log_line(std::string_view line, std::size_t lineno = 0);

}  // namespace beamsim
