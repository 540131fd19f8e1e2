#include "beamsim/protocol.hpp"

#include <algorithm>

namespace beamsim {

const char* to_string(Protocol p) { return p == Protocol::Beam ? "beam" : "mybeam"; }

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "beam") return Protocol::Beam;
  if (s == "mybeam") return Protocol::MyBeam;
  return std::nullopt;
}

const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::JoinControl:
      return "JoinControl";
    case MessageKind::JoinReply:
      return "JoinReply";
    case MessageKind::StatusReport:
      return "StatusReport";
    case MessageKind::EmergencyMsg:
      return "EmergencyMsg";
    case MessageKind::Ack:
      return "Ack";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) {
  for (auto k : {MessageKind::JoinControl, MessageKind::JoinReply, MessageKind::StatusReport,
                 MessageKind::EmergencyMsg, MessageKind::Ack}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

std::uint32_t message_size(MessageKind k) {
  switch (k) {
    case MessageKind::JoinControl:
      return 64;
    case MessageKind::JoinReply:
      return 64;
    case MessageKind::StatusReport:
      return 128;
    case MessageKind::EmergencyMsg:
      return 512;
    case MessageKind::Ack:
      return 48;
  }
  return 1;
}

const char* to_string(Role r) {
  switch (r) {
    case Role::Unaffiliated:
      return "none";
    case Role::CH:
      return "CH";
    case Role::SCH:
      return "SCH";
    case Role::CM:
      return "CM";
  }
  return "?";
}

Message MessageFactory::make(MessageKind kind, NodeId sender, std::optional<NodeId> target,
                             SimTime now) {
  Message m;
  m.kind = kind;
  m.msg_id = next_id_++;
  m.origin = sender;
  m.sender = sender;
  m.target = target;
  m.created_at = now;
  m.size = message_size(kind);
  return m;
}

double speed_alarm_threshold(double reported_speed) {
  return reported_speed + (1.0 / 3.0) * reported_speed;
}

bool detect_emergency(const ReportedStatus& current, const std::optional<ReportedStatus>& reported,
                      bool detect_decrease) {
  if (!reported) return false;
  if (current.speed > speed_alarm_threshold(reported->speed)) return true;
  if (current.yaw_rate > reported->yaw_rate + 30.0) return true;
  if (detect_decrease && current.speed < reported->speed - (1.0 / 3.0) * reported->speed) {
    return true;
  }
  return false;
}

void AckTracker::arm(const Message& msg, NodeId recipient) {
  auto& e = entries_[{msg.msg_id, recipient}];
  e.msg = msg;
}

bool AckTracker::acknowledge(std::uint64_t msg_id, NodeId recipient) {
  return entries_.erase({msg_id, recipient}) > 0;
}

AckTracker::TimeoutResult AckTracker::on_timeout(std::uint64_t msg_id, NodeId recipient,
                                                 int max_attempts) {
  TimeoutResult out;
  const auto it = entries_.find({msg_id, recipient});
  if (it == entries_.end()) return out;
  out.attempt = ++it->second.attempts;
  if (out.attempt <= max_attempts) {
    out.action = Action::Resend;
    out.resend = it->second.msg;
  } else {
    out.action = Action::Discard;
    entries_.erase(it);
  }
  return out;
}

bool AckTracker::pending(std::uint64_t msg_id, NodeId recipient) const {
  return entries_.contains({msg_id, recipient});
}

std::optional<int> AckTracker::attempts(std::uint64_t msg_id, NodeId recipient) const {
  const auto it = entries_.find({msg_id, recipient});
  if (it == entries_.end()) return std::nullopt;
  return it->second.attempts;
}

Message rsu_periodic_tick(const RsuState& rsu, SimTime now, MessageFactory& factory) {
  return factory.make(MessageKind::JoinControl, rsu.node(), std::nullopt, now);
}

JoinOutcome rsu_handle_join_reply(RsuState& rsu, VehicleIndex vid, SimTime now,
                                  SimTime life_timer) {
  const auto it = rsu.mg_members.find(vid);
  if (it != rsu.mg_members.end()) {
    it->second.last_heard = now;
    return JoinOutcome::Duplicate;
  }
  rsu.mg_members.emplace(vid, MemberEntry{now, now + life_timer, now});
  return JoinOutcome::Added;
}

std::optional<Message> vehicle_handle_join(const VehicleState& vehicle, const Message& join,
                                           SimTime now, MessageFactory& factory) {
  if (!vehicle.willing || !vehicle.online()) return std::nullopt;
  if (join.sender.is_vehicle() && vehicle.group != GroupLabel::NMG) return std::nullopt;
  return factory.make(MessageKind::JoinReply, vehicle.node(), join.sender, now);
}

std::optional<Message> vehicle_status_tick(VehicleState& vehicle, SimTime now,
                                           MessageFactory& factory) {
  if (!vehicle.parent || !vehicle.online()) return std::nullopt;
  Message m = factory.make(MessageKind::StatusReport, vehicle.node(), vehicle.parent, now);
  StatusPayload p;
  p.current = {vehicle.kinematics.speed, vehicle.yaw_rate};
  p.position = vehicle.kinematics.position;
  p.previous = vehicle.last_reported;
  m.payload = p;
  vehicle.last_reported = p.current;
  return m;
}

RelayGraph build_relay_graph(Protocol protocol, const TopologyView& view) {
  RelayGraph g;
  const auto online = [&](VehicleIndex v) { return view.online.contains(v); };
  std::map<NodeId, Position> where;
  for (const auto& r : view.rsus) where[r.node] = r.position;
  for (const auto& [v, p] : view.online) where[NodeId::vehicle(v)] = p;
  const auto in_range = [&](NodeId a, NodeId b) {
    const auto pa = where.find(a);
    const auto pb = where.find(b);
    return pa != where.end() && pb != where.end() &&
           euclidean_distance(pa->second, pb->second) <= view.range_c;
  };
  const auto add = [&](NodeId from, NodeId to) {
    if (from == to || !in_range(from, to)) return;
    auto& out = g[from];
    if (std::find(out.begin(), out.end(), to) == out.end()) out.push_back(to);
  };

  if (protocol == Protocol::Beam) {
    for (const auto& r : view.rsus) {
      g[r.node];
      for (auto v : r.members) {
        if (online(v)) add(r.node, NodeId::vehicle(v));
      }
    }
    for (auto& [node, out] : g) std::sort(out.begin(), out.end());
    return g;
  }

  // member -> head of the cluster it belongs to
  std::map<VehicleIndex, VehicleIndex> head_of;
  for (const auto* list : {&view.mg_clusters, &view.nmg_clusters}) {
    for (const auto& c : *list) {
      for (const auto& m : c.members) head_of[m.id] = c.head;
    }
  }

  std::vector<VehicleIndex> heads;
  for (const auto* list : {&view.mg_clusters, &view.nmg_clusters}) {
    for (const auto& c : *list) {
      if (online(c.head)) heads.push_back(c.head);
    }
  }

  for (const auto& r : view.rsus) {
    g[r.node];
    for (const auto& c : view.mg_clusters) {
      if (c.parent == r.node && online(c.head)) add(r.node, NodeId::vehicle(c.head));
    }
    for (auto v : r.members) {
      if (!online(v)) continue;
      const auto h = head_of.find(v);
      const bool head_reaches = h != head_of.end() && online(h->second) &&
                                in_range(NodeId::vehicle(h->second), NodeId::vehicle(v));
      if (!head_reaches) add(r.node, NodeId::vehicle(v));
    }
  }

  const auto head_edges = [&](const ClusterRecord& c) {
    if (!online(c.head)) return;
    const NodeId h = NodeId::vehicle(c.head);
    if (c.parent.is_rsu() || online(c.parent.index)) add(h, c.parent);
    for (const auto& m : c.members) {
      if (online(m.id)) add(h, NodeId::vehicle(m.id));
    }
    for (auto other : heads) add(h, NodeId::vehicle(other));
  };

  for (const auto& c : view.mg_clusters) {
    head_edges(c);
    if (!online(c.head)) continue;
    const NodeId h = NodeId::vehicle(c.head);
    for (const auto& child : view.nmg_clusters) {
      if (child.parent == h && online(child.head)) add(h, NodeId::vehicle(child.head));
    }
    for (const auto& [v, head] : view.attachments) {
      if (head == c.head && online(v) && !head_of.contains(v)) add(h, NodeId::vehicle(v));
    }
  }
  for (const auto& c : view.nmg_clusters) head_edges(c);

  for (auto& [node, out] : g) std::sort(out.begin(), out.end());
  return g;
}

std::vector<Message> disseminate_emergency(NodeId sender, const Message& emergency,
                                           std::span<const NodeId> recipients) {
  std::vector<Message> out;
  const auto& base = std::get<EmergencyPayload>(emergency.payload);
  for (const NodeId r : recipients) {
    if (r == sender) continue;
    if (std::find(base.hop_path.begin(), base.hop_path.end(), r) != base.hop_path.end()) continue;
    Message copy = emergency;
    copy.sender = sender;
    copy.target = r;
    auto& p = std::get<EmergencyPayload>(copy.payload);
    if (p.hop_path.empty() || p.hop_path.back() != sender) p.hop_path.push_back(sender);
    out.push_back(std::move(copy));
  }
  return out;
}

EmergencyResponse vehicle_handle_emergency(VehicleState& vehicle, const Message& emergency,
                                           Protocol protocol, std::span<const NodeId> relay_targets,
                                           SimTime now, MessageFactory& factory) {
  EmergencyResponse out;
  out.ack = factory.make(MessageKind::Ack, vehicle.node(), emergency.sender, now);
  out.ack.payload = AckPayload{emergency.msg_id};

  out.duplicate = !vehicle.seen_emergencies.insert(emergency.msg_id).second;
  if (out.duplicate) return out;
  if (protocol == Protocol::MyBeam) {
    out.relays = disseminate_emergency(vehicle.node(), emergency, relay_targets);
  }
  return out;
}

}  // namespace beamsim
