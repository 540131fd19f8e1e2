#include "beamsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace beamsim {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

const char* to_string(EmergencyKind k) {
  return k == EmergencyKind::SpeedSpike ? "speed-spike" : "yaw-spike";
}

std::optional<EmergencyKind> parse_emergency_kind(std::string_view s) {
  if (s == "speed-spike") return EmergencyKind::SpeedSpike;
  if (s == "yaw-spike") return EmergencyKind::YawSpike;
  return std::nullopt;
}

Simulation::Simulation(SimulationConfig config, std::shared_ptr<const MobilityModel> mobility)
    : config_(std::move(config)),
      mobility_(std::move(mobility)),
      channel_([&] {
        ChannelModel m = config_.channel;
        m.range = config_.range_c;
        return m;
      }(),
               config_.seed),
      willingness_rng_(config_.seed, "join-willingness") {
  if (!mobility_) throw ValidationError("simulation needs a mobility model");
  if (mobility_->vehicle_count() == 0) throw ValidationError("no vehicles");
  if (!(config_.range_c > 0.0)) throw ValidationError("range_C must be positive");
  if (config_.tick.us <= 0) throw ValidationError("tick must be positive");
  if (config_.horizon.us < 0) throw ValidationError("horizon must be non-negative");
  const auto& tm = config_.timers;
  if (tm.periodic.us <= 0 || tm.status.us <= 0 || tm.life.us <= 0 || tm.ack.us <= 0) {
    throw ValidationError("timers must be strictly positive");
  }
  if (config_.status_phase.us < 0) throw ValidationError("status phase must be non-negative");
  if (config_.max_attempts < 0) throw ValidationError("max_attempts must be non-negative");
  const auto& ch = config_.channel;
  if (ch.base_latency.us < 0 || ch.jitter.us < 0) {
    throw ValidationError("channel latency and jitter must be non-negative");
  }
  if (ch.jitter > ch.base_latency) throw ValidationError("channel jitter exceeds base latency");
  if (!(ch.loss_probability >= 0.0 && ch.loss_probability <= 1.0)) {
    throw ValidationError("loss_probability must lie in [0, 1]");
  }
  if (!(config_.join_probability >= 0.0 && config_.join_probability <= 1.0)) {
    throw ValidationError("join_probability must lie in [0, 1]");
  }
  if (config_.rsus.empty()) throw ValidationError("at least one RSU is required");

  vehicles_.resize(mobility_->vehicle_count());
  for (VehicleIndex v = 0; v < vehicles_.size(); ++v) vehicles_[v].vid = v;
  rsus_.resize(config_.rsus.size());
  for (std::uint32_t r = 0; r < rsus_.size(); ++r) {
    rsus_[r].index = r;
    rsus_[r].position = config_.rsus[r];
  }
}

std::string Simulation::node_name(NodeId n) const {
  if (n.is_rsu()) return "rsu" + std::to_string(n.index + 1);
  return mobility_->vehicle_ids().at(n.index);
}

bool Simulation::known(NodeId n) const {
  return n.is_rsu() ? n.index < rsus_.size() : n.index < vehicles_.size();
}

std::optional<Position> Simulation::locate(NodeId n) const {
  if (n.is_rsu()) return rsus_.at(n.index).position;
  if (!online(n.index)) return std::nullopt;
  return position(n.index);
}

std::vector<NodeId> Simulation::nodes() const {
  std::vector<NodeId> out;
  out.reserve(vehicles_.size() + rsus_.size());
  for (VehicleIndex v = 0; v < vehicles_.size(); ++v) out.push_back(NodeId::vehicle(v));
  for (std::uint32_t r = 0; r < rsus_.size(); ++r) out.push_back(NodeId::rsu(r));
  return out;
}

bool Simulation::online(VehicleIndex v) const {
  return !vehicles_[v].failed && mobility_->active_at(v, t());
}

Position Simulation::position(VehicleIndex v) const { return mobility_->state_at(v, t()).position; }

Position Simulation::position(NodeId n) const {
  return n.is_rsu() ? rsus_.at(n.index).position : position(n.index);
}

VehicleSnapshot Simulation::snapshot(VehicleIndex v) const {
  const Kinematics k = mobility_->state_at(v, t());
  return {v, k.position, k.speed, k.heading};
}

void Simulation::record(std::string_view kind, NodeId node, const std::string& detail) {
  log_.record(queue_.now(), kind, node_name(node), detail);
}

void Simulation::record(std::string_view kind, std::string_view node, const std::string& detail) {
  log_.record(queue_.now(), kind, node, detail);
}

void Simulation::inject_emergency(const EmergencySpec& spec) {
  if (ran_) throw PreconditionError("injections must precede run()");
  if (spec.vehicle != kNearestRsu && !mobility_->find(spec.vehicle)) {
    throw UnknownVehicle("unknown vehicle '" + spec.vehicle + "'");
  }
  const SimTime at = SimTime::from_seconds(spec.at);
  if (at.us < 0 || at >= config_.horizon) {
    throw PreconditionError("emergency at " + num(spec.at) + " s is outside the horizon");
  }
  injections_.push_back(spec);
  queue_.schedule(at, EventKind::EmergencyInjection, InjectionPayload{injections_.size() - 1});
}

void Simulation::inject_failure(const FailureSpec& spec) {
  if (ran_) throw PreconditionError("injections must precede run()");
  if (!mobility_->find(spec.vehicle)) throw UnknownVehicle("unknown vehicle '" + spec.vehicle + "'");
  const SimTime at = SimTime::from_seconds(spec.at);
  if (at.us < 0 || at >= config_.horizon) {
    throw PreconditionError("failure at " + num(spec.at) + " s is outside the horizon");
  }
  injections_.push_back(spec);
  queue_.schedule(at, EventKind::EmergencyInjection, InjectionPayload{injections_.size() - 1});
}

const EventLog& Simulation::run() {
  if (ran_) throw PreconditionError("run() called twice");
  ran_ = true;
  initialize();
  while (!queue_.empty() && queue_.top().fire_at < config_.horizon) dispatch(queue_.pop());
  finish();
  return log_;
}

void Simulation::initialize() {
  for (auto& v : vehicles_) v.willing = willingness_rng_.bernoulli(config_.join_probability);

  const auto& ch = channel_.model();
  record("init", "sim",
         std::string("protocol=") + to_string(config_.protocol) +
             " seed=" + std::to_string(config_.seed) + " vehicles=" +
             std::to_string(vehicles_.size()) + " rsus=" + std::to_string(rsus_.size()) +
             " horizon=" + format_time(config_.horizon) + " range=" + num(config_.range_c) +
             " latency=" + format_time(ch.base_latency) + " jitter=" + format_time(ch.jitter) +
             " loss=" + num(ch.loss_probability) +
             " max_attempts=" + std::to_string(config_.max_attempts));
  for (const auto& r : rsus_) {
    record("node", r.node(), "kind=rsu x=" + num(r.position.x) + " y=" + num(r.position.y));
  }
  for (const auto& v : vehicles_) {
    record("node", v.node(), std::string("kind=vehicle willing=") + (v.willing ? "1" : "0"));
  }

  const auto maybe = [&](SimTime at, EventKind kind, EventPayload p) {
    if (at < config_.horizon) queue_.schedule(at, kind, std::move(p));
  };
  maybe(config_.tick, EventKind::MobilityRefresh, {});
  maybe(config_.timers.periodic, EventKind::TimerMaturity,
        TimerPayload{TimerName::Periodic, NodeId::rsu(0), {}, 0, {}});
  for (const auto& v : vehicles_) {
    maybe(config_.status_phase, EventKind::TimerMaturity,
          TimerPayload{TimerName::Status, v.node(), {}, 0, {}});
  }
}

void Simulation::dispatch(const Event& e) {
  switch (e.kind) {
    case EventKind::TimerMaturity:
      on_timer(std::get<TimerPayload>(e.payload));
      break;
    case EventKind::MessageDelivery:
      on_delivery(std::get<DeliveryPayload>(e.payload));
      break;
    case EventKind::MobilityRefresh:
      maintenance();
      if (queue_.now() + config_.tick < config_.horizon) {
        queue_.schedule(queue_.now() + config_.tick, EventKind::MobilityRefresh);
      }
      break;
    case EventKind::EmergencyInjection:
      on_injection(std::get<InjectionPayload>(e.payload).index);
      break;
  }
}

void Simulation::finish() {
  while (!queue_.empty()) {
    const Event e = queue_.pop();
    if (e.kind != EventKind::MessageDelivery) continue;
    const auto& d = std::get<DeliveryPayload>(e.payload);
    log_.record(config_.horizon, "discard", node_name(d.recipient),
                "pkt=" + std::to_string(d.packet_id) + " msg=" + std::to_string(d.msg.msg_id) +
                    " kind=" + to_string(d.msg.kind) + " from=" + node_name(d.msg.sender) +
                    " reason=horizon");
  }
  const auto rng = [&](const char* stream, std::uint64_t draws) {
    log_.record(config_.horizon, "rng", "sim",
                std::string("stream=") + stream + " draws=" + std::to_string(draws));
  };
  rng("mobility", mobility_->draws());
  rng("join-willingness", willingness_rng_.draws());
  rng("channel-loss", channel_.loss_draws());
  rng("jitter", channel_.jitter_draws());
  log_.record(config_.horizon, "end", "sim", "messages=" + std::to_string(factory_.issued()));
}

// --- traffic ---------------------------------------------------------------

void Simulation::send(const Message& msg, int attempt) {
  const Position from = position(msg.sender);
  const TransmitResult res = channel_.transmit(from, msg, queue_.now(), *this);
  const std::string base = "msg=" + std::to_string(msg.msg_id) + " kind=" + to_string(msg.kind);
  if (res.route_error) {
    record("route_error", msg.sender, base + " to=unknown");
    return;
  }
  if (msg.is_broadcast()) {
    record("broadcast", msg.sender, base + " recipients=" + std::to_string(res.outcomes.size()));
  }
  for (const auto& o : res.outcomes) {
    const std::uint64_t pkt = next_packet_++;
    const std::string head = "pkt=" + std::to_string(pkt) + " " + base + " to=" + node_name(o.recipient);
    record("send", msg.sender,
           head + " size=" + std::to_string(msg.size) + " attempt=" + std::to_string(attempt));
    switch (o.status) {
      case DeliveryStatus::Delivered:
        queue_.schedule(o.arrival, EventKind::MessageDelivery,
                        DeliveryPayload{msg, o.recipient, pkt, queue_.now()});
        break;
      case DeliveryStatus::Lost:
        record("loss", msg.sender, head);
        break;
      case DeliveryStatus::OutOfRange:
      case DeliveryStatus::Down:
        record("discard", msg.sender, head + " reason=" + to_string(o.status));
        break;
    }
  }
}

void Simulation::on_delivery(const DeliveryPayload& d) {
  const Message& m = d.msg;
  const std::string detail = "pkt=" + std::to_string(d.packet_id) + " msg=" + std::to_string(m.msg_id) +
                             " kind=" + to_string(m.kind) + " from=" + node_name(m.sender);
  if (d.recipient.is_vehicle() && !online(d.recipient.index)) {
    record("discard", d.recipient, detail + " reason=down");
    return;
  }
  record("deliver", d.recipient, detail + " size=" + std::to_string(m.size));
  switch (m.kind) {
    case MessageKind::JoinControl:
      if (d.recipient.is_vehicle()) on_join_control(d.recipient.index, m);
      break;
    case MessageKind::JoinReply:
      on_join_reply(d.recipient, m);
      break;
    case MessageKind::StatusReport:
      on_status(d.recipient, m);
      break;
    case MessageKind::EmergencyMsg:
      on_emergency(d.recipient, m);
      break;
    case MessageKind::Ack:
      on_ack(d.recipient, m);
      break;
  }
}

void Simulation::on_join_control(VehicleIndex v, const Message& m) {
  const VehicleState& vs = vehicles_[v];
  if (m.sender.is_rsu()) {
    if (vs.group != GroupLabel::MG) return;
    const auto nearest = nearest_rsu(v);
    if (!nearest || *nearest != m.sender.index) return;
  } else {
    if (config_.protocol != Protocol::MyBeam || registered_at(v)) return;
  }
  if (auto reply = vehicle_handle_join(vs, m, queue_.now(), factory_)) send(*reply);
}

void Simulation::on_join_reply(NodeId at, const Message& m) {
  const VehicleIndex v = m.sender.index;
  if (at.is_rsu()) {
    const std::uint32_t r = at.index;
    if (const auto other = registered_at(v); other && *other != r) deregister(*other, v, "handover");
    const JoinOutcome outcome =
        rsu_handle_join_reply(rsus_[r], v, queue_.now(), config_.timers.life);
    if (outcome == JoinOutcome::Duplicate) {
      record("join_discard", at, "vid=" + node_name(m.sender));
      return;
    }
    const SimTime deadline = rsus_[r].mg_members.at(v).deadline;
    record("register", at, "vid=" + node_name(m.sender) + " deadline=" + format_time(deadline));
    queue_.schedule(deadline, EventKind::TimerMaturity,
                    TimerPayload{TimerName::Life, at, m.sender, 0, deadline});
    if (config_.protocol == Protocol::MyBeam) {
      try_enter_cluster(mg_clusters_, v, at);
      refresh_roles();
    }
    return;
  }

  if (config_.protocol != Protocol::MyBeam) return;
  const VehicleIndex h = at.index;
  if (mg_cluster_headed_by(h) == nullptr || registered_at(v)) return;
  join_replies_[v].insert(h);
  const bool placed = attachments_.contains(v) ||
                      std::any_of(nmg_clusters_.begin(), nmg_clusters_.end(),
                                  [&](const ClusterRecord& c) { return c.contains(v); });
  if (placed) return;
  try_enter_cluster(nmg_clusters_, v, at);
  const bool entered = std::any_of(nmg_clusters_.begin(), nmg_clusters_.end(),
                                   [&](const ClusterRecord& c) { return c.contains(v); });
  if (!entered) {
    attachments_[v] = h;
    record("attach", m.sender, "head=" + node_name(at));
  }
  refresh_roles();
}

void Simulation::on_status(NodeId at, const Message& m) {
  const auto& p = std::get<StatusPayload>(m.payload);
  const VehicleIndex v = m.sender.index;
  if (at.is_rsu()) {
    auto& members = rsus_[at.index].mg_members;
    const auto it = members.find(v);
    if (it == members.end()) return;
    it->second.last_heard = queue_.now();
  } else {
    if (config_.protocol != Protocol::MyBeam || vehicles_[at.index].role != Role::CH) return;
  }
  if (detect_emergency(p.current, p.previous, config_.detect_decrease)) originate_emergency(at, m);
}

AckTracker& Simulation::tracker(NodeId n) {
  return n.is_rsu() ? rsus_.at(n.index).acks : vehicles_.at(n.index).acks;
}

void Simulation::originate_emergency(NodeId detector, const Message& report) {
  const RelayGraph graph = build_relay_graph(config_.protocol, topology());
  Message e = factory_.make(MessageKind::EmergencyMsg, detector, std::nullopt, queue_.now());
  e.payload = EmergencyPayload{report.sender.index, report.msg_id, {}};

  std::string mg;
  for (VehicleIndex v = 0; v < vehicles_.size(); ++v) {
    if (!registered_at(v)) continue;
    if (!mg.empty()) mg += ',';
    mg += node_name(NodeId::vehicle(v));
  }
  record("detect", detector,
         "msg=" + std::to_string(e.msg_id) + " subject=" + node_name(report.sender) +
             " report=" + std::to_string(report.msg_id) + " mg=" + mg);
  std::string edges;
  for (const auto& [from, out] : graph) {
    for (const NodeId to : out) {
      if (!edges.empty()) edges += ',';
      edges += node_name(from) + '>' + node_name(to);
    }
  }
  record("topology", detector, "msg=" + std::to_string(e.msg_id) + " edges=" + edges);

  relay_graphs_[e.msg_id] = graph;
  if (detector.is_rsu()) {
    rsus_[detector.index].seen_emergencies.insert(e.msg_id);
  } else {
    vehicles_[detector.index].seen_emergencies.insert(e.msg_id);
  }
  const auto it = graph.find(detector);
  if (it == graph.end()) return;
  send_emergency_copies(detector, disseminate_emergency(detector, e, it->second));
}

void Simulation::send_emergency_copies(NodeId from, const std::vector<Message>& copies) {
  for (const auto& c : copies) {
    send(c, 0);
    tracker(from).arm(c, *c.target);
    queue_.schedule(queue_.now() + config_.timers.ack, EventKind::TimerMaturity,
                    TimerPayload{TimerName::Ack, from, *c.target, c.msg_id, {}});
  }
}

void Simulation::on_emergency(NodeId at, const Message& m) {
  std::span<const NodeId> targets;
  if (const auto g = relay_graphs_.find(m.msg_id); g != relay_graphs_.end()) {
    if (const auto it = g->second.find(at); it != g->second.end()) targets = it->second;
  }
  const std::string detail = "msg=" + std::to_string(m.msg_id) + " from=" + node_name(m.sender);

  if (at.is_vehicle()) {
    EmergencyResponse resp = vehicle_handle_emergency(vehicles_[at.index], m, config_.protocol,
                                                      targets, queue_.now(), factory_);
    send(resp.ack);
    if (resp.duplicate) {
      record("duplicate", at, detail);
      return;
    }
    send_emergency_copies(at, resp.relays);
    return;
  }

  Message ack = factory_.make(MessageKind::Ack, at, m.sender, queue_.now());
  ack.payload = AckPayload{m.msg_id};
  send(ack);
  if (!rsus_[at.index].seen_emergencies.insert(m.msg_id).second) {
    record("duplicate", at, detail);
    return;
  }
  if (config_.protocol == Protocol::MyBeam) {
    send_emergency_copies(at, disseminate_emergency(at, m, targets));
  }
}

void Simulation::on_ack(NodeId at, const Message& m) {
  const auto& p = std::get<AckPayload>(m.payload);
  if (tracker(at).acknowledge(p.acked_msg_id, m.sender)) {
    record("ack_clear", at, "msg=" + std::to_string(p.acked_msg_id) + " from=" + node_name(m.sender));
  }
}

// --- timers ----------------------------------------------------------------

void Simulation::on_timer(const TimerPayload& p) {
  switch (p.name) {
    case TimerName::Periodic:
      on_periodic();
      break;
    case TimerName::Status:
      on_status_timer(p.node.index);
      break;
    case TimerName::Ack:
      on_ack_timer(p);
      break;
    case TimerName::Life:
      on_life_timer(p);
      break;
  }
}

void Simulation::on_periodic() {
  for (const auto& r : rsus_) record("timer", r.node(), "name=periodic");
  maintenance();
  if (config_.protocol == Protocol::MyBeam) {
    form_mg_clusters();
    form_nmg_clusters();
    refresh_roles();
  }
  for (const auto& r : rsus_) send(rsu_periodic_tick(r, queue_.now(), factory_));
  if (config_.protocol == Protocol::MyBeam) {
    std::vector<VehicleIndex> heads;
    for (const auto& c : mg_clusters_) {
      if (online(c.head)) heads.push_back(c.head);
    }
    for (auto h : heads) {
      send(factory_.make(MessageKind::JoinControl, NodeId::vehicle(h), std::nullopt, queue_.now()));
    }
  }
  const SimTime next = queue_.now() + config_.timers.periodic;
  if (next < config_.horizon) {
    queue_.schedule(next, EventKind::TimerMaturity,
                    TimerPayload{TimerName::Periodic, NodeId::rsu(0), {}, 0, {}});
  }
}

void Simulation::on_status_timer(VehicleIndex v) {
  const NodeId n = NodeId::vehicle(v);
  const SimTime next = queue_.now() + config_.timers.status;
  if (next < config_.horizon) {
    queue_.schedule(next, EventKind::TimerMaturity, TimerPayload{TimerName::Status, n, {}, 0, {}});
  }
  if (!online(v)) return;
  record("timer", n, "name=status");

  VehicleState& vs = vehicles_[v];
  Kinematics k = mobility_->state_at(v, t());
  k.heading = std::fmod(k.heading + vs.heading_offset, 360.0);
  if (k.heading < 0.0) k.heading += 360.0;
  k.speed *= vs.speed_factor;
  vs.yaw_rate = vs.heading_at_last_status
                    ? heading_difference(k.heading, *vs.heading_at_last_status) /
                          config_.timers.status.seconds()
                    : 0.0;
  vs.heading_at_last_status = k.heading;
  vs.kinematics = k;

  auto msg = vehicle_status_tick(vs, queue_.now(), factory_);
  if (!msg) {
    record("unsendable", n, "kind=StatusReport");
    return;
  }
  send(*msg);
}

void Simulation::on_ack_timer(const TimerPayload& p) {
  AckTracker& tr = tracker(p.node);
  if (!tr.pending(p.msg_id, p.peer)) return;
  const std::string who = "msg=" + std::to_string(p.msg_id) + " to=" + node_name(p.peer);
  record("timer", p.node, "name=ack " + who);
  if (p.node.is_vehicle() && !online(p.node.index)) {
    tr.acknowledge(p.msg_id, p.peer);
    return;
  }
  const auto res = tr.on_timeout(p.msg_id, p.peer, config_.max_attempts);
  if (res.action == AckTracker::Action::Resend) {
    record("retransmit", p.node, who + " attempt=" + std::to_string(res.attempt));
    send(*res.resend, res.attempt);
    queue_.schedule(queue_.now() + config_.timers.ack, EventKind::TimerMaturity, p);
    return;
  }
  if (res.action != AckTracker::Action::Discard) return;

  record("member_discard", p.node,
         "msg=" + std::to_string(p.msg_id) + " vid=" + node_name(p.peer) +
             " attempts=" + std::to_string(res.attempt - 1));
  if (!p.peer.is_vehicle()) return;
  const VehicleIndex v = p.peer.index;
  if (p.node.is_rsu()) {
    if (rsus_[p.node.index].mg_members.contains(v)) deregister(p.node.index, v, "ack-cap");
  } else {
    for (auto* list : {&mg_clusters_, &nmg_clusters_}) {
      for (std::size_t i = 0; i < list->size(); ++i) {
        if ((*list)[i].head == p.node.index && (*list)[i].contains(v) && v != p.node.index) {
          apply(*list, i, MaintenanceEvent::MemberExited, v, "ack-cap");
          break;
        }
      }
    }
    if (const auto it = attachments_.find(v); it != attachments_.end() && it->second == p.node.index) {
      attachments_.erase(it);
      record("detach", p.peer, "head=" + node_name(p.node) + " reason=ack-cap");
    }
  }
  refresh_roles();
}

void Simulation::on_life_timer(const TimerPayload& p) {
  auto& members = rsus_[p.node.index].mg_members;
  const auto it = members.find(p.peer.index);
  if (it == members.end() || it->second.deadline != p.deadline) return;
  record("timer", p.node, "name=life vid=" + node_name(p.peer));
  const SimTime grace{2 * config_.timers.periodic.us};
  if (it->second.last_heard + grace >= queue_.now()) {
    it->second.deadline = queue_.now() + config_.timers.life;
    record("renew", p.node,
           "vid=" + node_name(p.peer) + " deadline=" + format_time(it->second.deadline));
    queue_.schedule(it->second.deadline, EventKind::TimerMaturity,
                    TimerPayload{TimerName::Life, p.node, p.peer, 0, it->second.deadline});
    return;
  }
  deregister(p.node.index, p.peer.index, "expired");
  refresh_roles();
}

void Simulation::on_injection(std::size_t index) {
  if (const auto* f = std::get_if<FailureSpec>(&injections_[index])) {
    const VehicleIndex v = *mobility_->find(f->vehicle);
    vehicles_[v].failed = true;
    record("fail", NodeId::vehicle(v), "kind=failure");
    return;
  }
  const auto& e = std::get<EmergencySpec>(injections_[index]);
  std::optional<VehicleIndex> target;
  if (e.vehicle == kNearestRsu) {
    double best = std::numeric_limits<double>::infinity();
    for (VehicleIndex v = 0; v < vehicles_.size(); ++v) {
      if (!online(v)) continue;
      for (const auto& r : rsus_) {
        const double d = euclidean_distance(position(v), r.position);
        if (d < best) {
          best = d;
          target = v;
        }
      }
    }
  } else {
    target = mobility_->find(e.vehicle);
  }
  const std::string detail =
      std::string("kind=") + to_string(e.kind) + " magnitude=" + num(e.magnitude);
  if (!target) {
    record("inject", "sim", detail + " skipped=no-vehicle");
    return;
  }
  auto& vs = vehicles_[*target];
  if (e.kind == EmergencyKind::SpeedSpike) {
    vs.speed_factor *= 1.0 + e.magnitude;
  } else {
    vs.heading_offset += e.magnitude;
  }
  record("inject", NodeId::vehicle(*target), detail);
}

// --- membership and clustering ----------------------------------------------

std::optional<std::uint32_t> Simulation::registered_at(VehicleIndex v) const {
  for (const auto& r : rsus_) {
    if (r.mg_members.contains(v)) return r.index;
  }
  return std::nullopt;
}

std::optional<std::size_t> Simulation::nearest_rsu(VehicleIndex v) const {
  if (!online(v)) return std::nullopt;
  return classify_rsu_membership(position(v), config_.rsus, config_.range_c).rsu;
}

void Simulation::deregister(std::uint32_t rsu, VehicleIndex v, const char* reason) {
  rsus_[rsu].mg_members.erase(v);
  record("deregister", NodeId::rsu(rsu),
         "vid=" + node_name(NodeId::vehicle(v)) + " reason=" + reason);
}

void Simulation::maintenance() {
  for (auto& vs : vehicles_) {
    const auto nearest = nearest_rsu(vs.vid);
    vs.group = nearest ? GroupLabel::MG : GroupLabel::NMG;
    vs.active = mobility_->active_at(vs.vid, t());
  }
  for (auto& r : rsus_) {
    std::vector<VehicleIndex> members;
    for (const auto& [v, entry] : r.mg_members) members.push_back(v);
    for (auto v : members) {
      if (!online(v)) {
        deregister(r.index, v, "down");
        continue;
      }
      const auto nearest = nearest_rsu(v);
      if (!nearest) {
        deregister(r.index, v, "range");
      } else if (*nearest != r.index) {
        deregister(r.index, v, "handover");
      }
    }
  }

  if (config_.protocol == Protocol::MyBeam) {
    maintain_cluster_list(mg_clusters_, true);
    maintain_cluster_list(nmg_clusters_, false);

    std::vector<std::pair<VehicleIndex, const char*>> drop;
    for (const auto& [v, h] : attachments_) {
      const char* reason = nullptr;
      if (!online(v)) {
        reason = "down";
      } else if (registered_at(v)) {
        reason = "registered";
      } else if (mg_cluster_headed_by(h) == nullptr || !online(h)) {
        reason = "head";
      } else if (euclidean_distance(position(v), position(h)) > config_.range_c) {
        reason = "range";
      }
      if (reason) drop.emplace_back(v, reason);
    }
    for (const auto& [v, reason] : drop) {
      record("detach", NodeId::vehicle(v),
             "head=" + node_name(NodeId::vehicle(attachments_.at(v))) + " reason=" + reason);
      attachments_.erase(v);
    }
  }
  refresh_roles();
}

bool Simulation::apply(std::vector<ClusterRecord>& list, std::size_t i, MaintenanceEvent ev,
                       VehicleIndex subject, const char* reason) {
  if (ev == MaintenanceEvent::MemberExited && subject == list[i].head) {
    ev = MaintenanceEvent::HeadFailed;
  }
  const double weight = ev == MaintenanceEvent::NodeEntered ? weight_in(list[i], subject) : 0.0;
  MaintenanceOutcome out =
      maintain(list[i], ev, subject, queue_.now(), config_.timers.life, weight);
  const std::string extra =
      "subject=" + node_name(NodeId::vehicle(subject)) + " reason=" + reason;
  if (out.cluster) {
    list[i] = std::move(*out.cluster);
    log_cluster(to_string(ev), list[i], extra);
    return true;
  }
  ClusterRecord gone = list[i];
  gone.members.clear();
  for (auto v : out.orphaned) gone.members.push_back({v, {}, 0.0});
  log_cluster("dissolved", gone, extra);
  list.erase(list.begin() + static_cast<std::ptrdiff_t>(i));
  return false;
}

void Simulation::maintain_cluster_list(std::vector<ClusterRecord>& list, bool mg) {
  const auto head_problem = [&](const ClusterRecord& c) -> const char* {
    if (!online(c.head)) return "down";
    const auto reg = registered_at(c.head);
    if (mg && reg != c.parent.index) return "deregistered";
    if (!mg && reg) return "registered";
    return nullptr;
  };

  for (std::size_t i = 0; i < list.size();) {
    bool alive = true;
    while (const char* why = head_problem(list[i])) {
      if (!apply(list, i, MaintenanceEvent::HeadFailed, list[i].head, why)) {
        alive = false;
        break;
      }
    }
    if (!alive) continue;

    if (!mg) {
      const VehicleIndex p = list[i].parent.index;
      const bool parent_ok = mg_cluster_headed_by(p) != nullptr && online(p) &&
                             euclidean_distance(position(list[i].head), position(p)) <=
                                 config_.range_c;
      if (!parent_ok) {
        log_cluster("dissolved", list[i], "reason=parent");
        list.erase(list.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
    }

    for (const VehicleIndex m : list[i].member_ids()) {
      if (m == list[i].head) continue;
      const char* why = nullptr;
      if (!online(m)) {
        why = "down";
      } else if (mg && registered_at(m) != list[i].parent.index) {
        why = "deregistered";
      } else if (!mg && registered_at(m)) {
        why = "registered";
      } else if (euclidean_distance(position(m), position(list[i].head)) > config_.range_c) {
        why = "range";
      }
      if (why) apply(list, i, MaintenanceEvent::MemberExited, m, why);
    }
    ++i;
  }
}

void Simulation::form_mg_clusters() {
  const FormationParams params{config_.range_c, config_.threshold_speed, config_.delta,
                               config_.timers.life};
  std::vector<ClusterRecord> fresh;
  for (const auto& r : rsus_) {
    std::vector<VehicleSnapshot> snap;
    for (const auto& [v, entry] : r.mg_members) {
      if (online(v)) snap.push_back(snapshot(v));
    }
    if (snap.empty()) continue;
    FormationResult fr = form_clusters(snap, r.node(), params, queue_.now(), next_cluster_id_);
    std::vector<ClusterRecord> previous;
    for (const auto& c : mg_clusters_) {
      if (c.parent == r.node()) previous.push_back(c);
    }
    carry_over_heads(fr.clusters, previous, snap, config_.range_c);
    for (auto& c : fr.clusters) fresh.push_back(std::move(c));
  }
  replace_clusters(mg_clusters_, std::move(fresh));
}

void Simulation::form_nmg_clusters() {
  const FormationParams params{config_.range_c, config_.threshold_speed, config_.delta,
                               config_.timers.life};
  std::map<VehicleIndex, std::vector<VehicleSnapshot>> by_parent;
  std::vector<VehicleSnapshot> all;
  for (const auto& [v, heard] : join_replies_) {
    if (!online(v) || registered_at(v)) continue;
    const Position pv = position(v);
    std::optional<VehicleIndex> best;
    double best_d = 0.0;
    for (const auto& c : mg_clusters_) {
      if (!online(c.head)) continue;
      const double d = euclidean_distance(pv, position(c.head));
      if (d > config_.range_c) continue;
      if (!best || d < best_d || (d == best_d && c.head < *best)) {
        best = c.head;
        best_d = d;
      }
    }
    if (!best) continue;
    by_parent[*best].push_back(snapshot(v));
    all.push_back(snapshot(v));
  }

  std::vector<ClusterRecord> fresh;
  for (auto& [h, snap] : by_parent) {
    FormationResult fr =
        form_clusters(snap, NodeId::vehicle(h), params, queue_.now(), next_cluster_id_);
    for (auto& c : fr.clusters) fresh.push_back(std::move(c));
  }
  carry_over_heads(fresh, nmg_clusters_, all, config_.range_c);
  replace_clusters(nmg_clusters_, std::move(fresh));

  for (const auto& [v, h] : attachments_) {
    const bool clustered = std::any_of(nmg_clusters_.begin(), nmg_clusters_.end(),
                                       [&](const ClusterRecord& c) { return c.contains(v); });
    record("detach", NodeId::vehicle(v),
           "head=" + node_name(NodeId::vehicle(h)) + (clustered ? " reason=clustered" : " reason=reform"));
  }
  attachments_.clear();
  join_replies_.clear();
}

void Simulation::replace_clusters(std::vector<ClusterRecord>& list, std::vector<ClusterRecord> fresh) {
  for (const auto& c : fresh) {
    const auto old = std::find_if(list.begin(), list.end(), [&](const ClusterRecord& o) {
      return o.cluster_id == c.cluster_id;
    });
    const bool unchanged = old != list.end() && old->head == c.head &&
                           old->secondary == c.secondary && old->parent == c.parent &&
                           old->radius == c.radius && old->member_ids() == c.member_ids();
    if (!unchanged) log_cluster("form", c);
  }
  for (const auto& o : list) {
    const bool kept = std::any_of(fresh.begin(), fresh.end(), [&](const ClusterRecord& c) {
      return c.cluster_id == o.cluster_id;
    });
    if (!kept) log_cluster("dissolved", o, "reason=reform");
  }
  list = std::move(fresh);
}

void Simulation::try_enter_cluster(std::vector<ClusterRecord>& list, VehicleIndex v, NodeId parent) {
  if (!online(v)) return;
  const VehicleSnapshot sv = snapshot(v);
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& c = list[i];
    if (c.parent != parent || c.contains(v) || !online(c.head)) continue;
    const VehicleSnapshot sh = snapshot(c.head);
    const double d = euclidean_distance(sv.position, sh.position);
    if (d > c.radius || d > config_.range_c || !direction_compatible(sv, sh, config_.delta)) continue;
    if (!best || d < best_d || (d == best_d && c.head < list[*best].head)) {
      best = i;
      best_d = d;
    }
  }
  if (best) apply(list, *best, MaintenanceEvent::NodeEntered, v, "join");
}

void Simulation::refresh_roles() {
  struct Assignment {
    Role role = Role::Unaffiliated;
    std::optional<std::uint64_t> cluster;
    std::optional<NodeId> parent;
  };
  std::vector<Assignment> next(vehicles_.size());
  for (const auto& r : rsus_) {
    for (const auto& [v, entry] : r.mg_members) next[v].parent = r.node();
  }
  const auto role_in = [](const ClusterRecord& c, VehicleIndex v) {
    if (v == c.head) return Role::CH;
    if (c.secondary == v) return Role::SCH;
    return Role::CM;
  };
  if (config_.protocol == Protocol::MyBeam) {
    for (const auto& c : mg_clusters_) {
      for (const auto& m : c.members) {
        next[m.id].role = role_in(c, m.id);
        next[m.id].cluster = c.cluster_id;
      }
    }
    for (const auto& c : nmg_clusters_) {
      for (const auto& m : c.members) {
        if (registered_at(m.id)) continue;
        next[m.id].role = role_in(c, m.id);
        next[m.id].cluster = c.cluster_id;
        next[m.id].parent = m.id == c.head ? c.parent : NodeId::vehicle(c.head);
      }
    }
    for (const auto& [v, h] : attachments_) {
      if (!next[v].parent) next[v].parent = NodeId::vehicle(h);
    }
  }
  for (auto& vs : vehicles_) {
    const auto& a = next[vs.vid];
    if (vs.role == a.role && vs.cluster == a.cluster && vs.parent == a.parent) continue;
    vs.role = a.role;
    vs.cluster = a.cluster;
    vs.parent = a.parent;
    record("role", vs.node(),
           std::string("role=") + to_string(a.role) +
               " cluster=" + (a.cluster ? std::to_string(*a.cluster) : "-") +
               " parent=" + (a.parent ? node_name(*a.parent) : "-"));
  }
}

const ClusterRecord* Simulation::mg_cluster_headed_by(VehicleIndex v) const {
  for (const auto& c : mg_clusters_) {
    if (c.head == v) return &c;
  }
  return nullptr;
}

double Simulation::weight_in(const ClusterRecord& c, VehicleIndex v) const {
  std::vector<VehicleSnapshot> snap;
  for (const auto& m : c.members) {
    if (online(m.id) && m.id != v) snap.push_back(snapshot(m.id));
  }
  snap.push_back(snapshot(v));
  std::vector<double> speeds;
  for (const auto& s : snap) speeds.push_back(s.speed);
  return compute_weight_factor(v, snap, average_speed(speeds), c.radius, config_.delta).value;
}

void Simulation::log_cluster(const char* event, const ClusterRecord& c, const std::string& extra) {
  std::string members;
  for (const auto& m : c.members) {
    if (!members.empty()) members += ',';
    members += node_name(NodeId::vehicle(m.id));
  }
  std::string detail = std::string("event=") + event + " cid=" + std::to_string(c.cluster_id) +
                       " head=" + node_name(NodeId::vehicle(c.head)) +
                       " sec=" + (c.secondary ? node_name(NodeId::vehicle(*c.secondary)) : "-") +
                       " radius=" + num(c.radius) + " members=" + members;
  if (!extra.empty()) detail += " " + extra;
  record("cluster", c.parent, detail);
}

TopologyView Simulation::topology() const {
  TopologyView view;
  view.range_c = config_.range_c;
  for (const auto& r : rsus_) {
    RsuView rv{r.node(), r.position, {}};
    for (const auto& [v, entry] : r.mg_members) rv.members.push_back(v);
    view.rsus.push_back(std::move(rv));
  }
  if (config_.protocol == Protocol::MyBeam) {
    view.mg_clusters = mg_clusters_;
    view.nmg_clusters = nmg_clusters_;
    view.attachments = attachments_;
  }
  for (VehicleIndex v = 0; v < vehicles_.size(); ++v) {
    if (online(v)) view.online[v] = position(v);
  }
  return view;
}

}  // namespace beamsim
