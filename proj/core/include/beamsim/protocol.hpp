#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "beamsim/clustering.hpp"
#include "beamsim/common.hpp"
#include "beamsim/geometry.hpp"
#include "beamsim/mobility.hpp"

namespace beamsim {

enum class Protocol { Beam, MyBeam };
const char* to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);

enum class MessageKind { JoinControl, JoinReply, StatusReport, EmergencyMsg, Ack };
const char* to_string(MessageKind k);
std::optional<MessageKind> parse_message_kind(std::string_view s);

// Wire sizes in bytes.
std::uint32_t message_size(MessageKind k);

struct ReportedStatus {
  double speed = 0.0;     // m/s
  double yaw_rate = 0.0;  // deg/s
  friend bool operator==(const ReportedStatus&, const ReportedStatus&) = default;
};

struct StatusPayload {
  ReportedStatus current;
  Position position;
  // What the vehicle sent last time, so any parent can run the comparison.
  std::optional<ReportedStatus> previous;
};

struct EmergencyPayload {
  VehicleIndex subject = 0;        // vehicle whose report raised the alarm
  std::uint64_t report_msg_id = 0; // the abnormal StatusReport
  std::vector<NodeId> hop_path;    // every node that has forwarded this copy, origin first
};

struct AckPayload {
  std::uint64_t acked_msg_id = 0;
};

struct Message {
  MessageKind kind = MessageKind::JoinControl;
  std::uint64_t msg_id = 0;
  NodeId origin;
  NodeId sender;
  std::optional<NodeId> target;  // empty = local broadcast
  SimTime created_at;
  std::uint32_t size = 0;
  std::variant<std::monostate, StatusPayload, EmergencyPayload, AckPayload> payload;

  bool is_broadcast() const { return !target.has_value(); }
};

// Hands out message ids and stamps sizes. Shared by every agent in one run.
class MessageFactory {
 public:
  Message make(MessageKind kind, NodeId sender, std::optional<NodeId> target, SimTime now);
  std::uint64_t issued() const { return next_id_ - 1; }

 private:
  std::uint64_t next_id_ = 1;
};

struct TimerSet {
  SimTime periodic = SimTime::from_us(1'000'000);
  SimTime status = SimTime::from_us(1'000'000);
  SimTime life = SimTime::from_us(30'000'000);
  SimTime ack = SimTime::from_us(1'000'000);
};

// r_speed + r_speed / 3, the "sudden increase" line a current speed must exceed.
double speed_alarm_threshold(double reported_speed);

// c_speed > (4/3) r_speed or c_yaw > r_yaw + 30, both strict. No prior report
// means nothing to compare against. With detect_decrease, a symmetric drop
// below (2/3) r_speed also fires.
bool detect_emergency(const ReportedStatus& current, const std::optional<ReportedStatus>& reported,
                      bool detect_decrease = false);

// Outstanding emergency deliveries awaiting an Ack, keyed by (msg, recipient).
class AckTracker {
 public:
  enum class Action { Resend, Discard, Stale };
  struct TimeoutResult {
    Action action = Action::Stale;
    int attempt = 0;
    std::optional<Message> resend;
  };

  void arm(const Message& msg, NodeId recipient);
  // True if an entry was cleared.
  bool acknowledge(std::uint64_t msg_id, NodeId recipient);
  // Bumps the attempt counter. While attempt <= max_attempts the stored copy
  // is returned for resending; past the cap the entry is dropped.
  TimeoutResult on_timeout(std::uint64_t msg_id, NodeId recipient, int max_attempts);

  bool pending(std::uint64_t msg_id, NodeId recipient) const;
  std::optional<int> attempts(std::uint64_t msg_id, NodeId recipient) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Message msg;
    int attempts = 0;
  };
  std::map<std::pair<std::uint64_t, NodeId>, Entry> entries_;
};

enum class Role { Unaffiliated, CH, SCH, CM };
const char* to_string(Role r);

struct VehicleState {
  VehicleIndex vid = 0;
  NodeId node() const { return NodeId::vehicle(vid); }

  Kinematics kinematics;
  double yaw_rate = 0.0;
  std::optional<double> heading_at_last_status;
  std::optional<ReportedStatus> last_reported;

  GroupLabel group = GroupLabel::NMG;
  Role role = Role::Unaffiliated;
  std::optional<std::uint64_t> cluster;
  std::optional<NodeId> parent;

  bool willing = true;
  bool failed = false;
  bool active = true;
  double speed_factor = 1.0;  // injected perturbations
  double heading_offset = 0.0;

  std::set<std::uint64_t> seen_emergencies;
  AckTracker acks;

  bool online() const { return active && !failed; }
};

struct MemberEntry {
  SimTime registered_at;
  SimTime deadline;
  SimTime last_heard;
};

struct RsuState {
  std::uint32_t index = 0;
  NodeId node() const { return NodeId::rsu(index); }
  Position position;
  std::map<VehicleIndex, MemberEntry> mg_members;
  std::vector<std::uint64_t> clusters;
  std::set<std::uint64_t> seen_emergencies;
  AckTracker acks;
};

// One JoinControl local broadcast per periodic-timer maturity.
Message rsu_periodic_tick(const RsuState& rsu, SimTime now, MessageFactory& factory);

enum class JoinOutcome { Added, Duplicate };
// Registers the replying vehicle, or discards the duplicate (refreshing only
// its last-heard time).
JoinOutcome rsu_handle_join_reply(RsuState& rsu, VehicleIndex vid, SimTime now, SimTime life_timer);

// Reply to a JoinControl. RSU invitations are answered by any willing
// vehicle; an invitation from a cluster head only by willing NMG vehicles.
std::optional<Message> vehicle_handle_join(const VehicleState& vehicle, const Message& join,
                                           SimTime now, MessageFactory& factory);

// StatusReport to the vehicle's parent, or nothing when it has none. Updates
// last_reported to the values sent.
std::optional<Message> vehicle_status_tick(VehicleState& vehicle, SimTime now,
                                           MessageFactory& factory);

// Directed relay edges for emergency dissemination at one instant.
using RelayGraph = std::map<NodeId, std::vector<NodeId>>;

struct RsuView {
  NodeId node;
  Position position;
  std::vector<VehicleIndex> members;
};

// What an observer needs to know to compute who forwards to whom.
struct TopologyView {
  std::vector<RsuView> rsus;
  std::vector<ClusterRecord> mg_clusters;
  std::vector<ClusterRecord> nmg_clusters;
  std::map<VehicleIndex, VehicleIndex> attachments;  // unclustered NMG vehicle -> MG head
  std::map<VehicleIndex, Position> online;            // vehicles able to send and receive
  double range_c = 300.0;
};

// beam: each RSU to its MG members, nothing else.
// mybeam: RSU -> MG heads and any MG member its head cannot reach; head ->
// parent, its members, child NMG heads, attached vehicles, and every other
// head. Edges longer than C are left out.
RelayGraph build_relay_graph(Protocol protocol, const TopologyView& view);

// Per-recipient copies of an emergency from `sender`, skipping any node
// already on the hop path. The sender is appended to each copy's path.
std::vector<Message> disseminate_emergency(NodeId sender, const Message& emergency,
                                           std::span<const NodeId> recipients);

struct EmergencyResponse {
  Message ack;
  std::vector<Message> relays;
  bool duplicate = false;
};

// Always acks the direct sender. Under mybeam a first-seen emergency is
// relayed to `relay_targets` minus the hop path; only heads have targets.
EmergencyResponse vehicle_handle_emergency(VehicleState& vehicle, const Message& emergency,
                                           Protocol protocol, std::span<const NodeId> relay_targets,
                                           SimTime now, MessageFactory& factory);

}  // namespace beamsim
