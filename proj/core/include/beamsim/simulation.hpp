#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "beamsim/clustering.hpp"
#include "beamsim/mobility.hpp"
#include "beamsim/protocol.hpp"
#include "beamsim/simcore.hpp"

namespace beamsim {

enum class EmergencyKind { SpeedSpike, YawSpike };
const char* to_string(EmergencyKind k);
std::optional<EmergencyKind> parse_emergency_kind(std::string_view s);

// Vehicle name "nearest-rsu" picks, at injection time, the online vehicle
// closest to any RSU.
inline constexpr const char* kNearestRsu = "nearest-rsu";

struct EmergencySpec {
  std::string vehicle = kNearestRsu;
  double at = 0.0;
  EmergencyKind kind = EmergencyKind::SpeedSpike;
  double magnitude = 0.0;  // fraction for speed, degrees for yaw
  friend bool operator==(const EmergencySpec&, const EmergencySpec&) = default;
};

struct FailureSpec {
  std::string vehicle;
  double at = 0.0;
  friend bool operator==(const FailureSpec&, const FailureSpec&) = default;
};

struct SimulationConfig {
  Protocol protocol = Protocol::MyBeam;
  std::uint64_t seed = 42;
  SimTime horizon = SimTime::from_us(500'000'000);
  SimTime tick = SimTime::from_us(100'000);
  SimTime status_phase = SimTime::from_us(550'000);
  std::vector<Position> rsus{{200.0, 200.0}, {1200.0, 200.0}};
  double range_c = 300.0;
  double threshold_speed = 100.0 * kKmhToMps;  // m/s
  double delta = kDefaultDirectionDelta;
  TimerSet timers;
  int max_attempts = 3;
  ChannelModel channel;  // range is overwritten with range_c
  double join_probability = 1.0;
  bool detect_decrease = false;
};

// One run of one protocol over one mobility model. Single-threaded; the log is
// a pure function of (config, mobility, injections).
class Simulation : private NodeDirectory {
 public:
  // Throws ValidationError for inconsistent settings.
  Simulation(SimulationConfig config, std::shared_ptr<const MobilityModel> mobility);

  // Throws UnknownVehicle or PreconditionError (at outside [0, horizon)).
  void inject_emergency(const EmergencySpec& spec);
  void inject_failure(const FailureSpec& spec);

  // Processes every event before the horizon, then closes the log. Once only.
  const EventLog& run();

  const EventLog& log() const { return log_; }
  const SimulationConfig& config() const { return config_; }
  const MobilityModel& mobility() const { return *mobility_; }
  SimTime now() const { return queue_.now(); }

  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  const std::vector<RsuState>& rsus() const { return rsus_; }
  const std::vector<ClusterRecord>& mg_clusters() const { return mg_clusters_; }
  const std::vector<ClusterRecord>& nmg_clusters() const { return nmg_clusters_; }
  std::string node_name(NodeId n) const;

 private:
  using Injection = std::variant<EmergencySpec, FailureSpec>;

  // NodeDirectory
  bool known(NodeId n) const override;
  std::optional<Position> locate(NodeId n) const override;
  std::vector<NodeId> nodes() const override;

  double t() const { return queue_.now().seconds(); }
  bool online(VehicleIndex v) const;
  Position position(VehicleIndex v) const;
  Position position(NodeId n) const;
  VehicleSnapshot snapshot(VehicleIndex v) const;
  void record(std::string_view kind, NodeId node, const std::string& detail);
  void record(std::string_view kind, std::string_view node, const std::string& detail);

  void initialize();
  void dispatch(const Event& e);
  void finish();

  // traffic
  void send(const Message& msg, int attempt = 0);
  void on_delivery(const DeliveryPayload& d);
  void on_join_control(VehicleIndex v, const Message& m);
  void on_join_reply(NodeId at, const Message& m);
  void on_status(NodeId at, const Message& m);
  void on_emergency(NodeId at, const Message& m);
  void on_ack(NodeId at, const Message& m);
  void originate_emergency(NodeId detector, const Message& report);
  void send_emergency_copies(NodeId from, const std::vector<Message>& copies);
  AckTracker& tracker(NodeId n);

  // timers
  void on_timer(const TimerPayload& p);
  void on_periodic();
  void on_status_timer(VehicleIndex v);
  void on_ack_timer(const TimerPayload& p);
  void on_life_timer(const TimerPayload& p);
  void on_injection(std::size_t index);

  // membership and clustering
  std::optional<std::uint32_t> registered_at(VehicleIndex v) const;
  std::optional<std::size_t> nearest_rsu(VehicleIndex v) const;
  void deregister(std::uint32_t rsu, VehicleIndex v, const char* reason);
  void maintenance();
  void maintain_cluster_list(std::vector<ClusterRecord>& list, bool mg);
  // False when the cluster was dissolved and erased.
  bool apply(std::vector<ClusterRecord>& list, std::size_t i, MaintenanceEvent ev,
             VehicleIndex subject, const char* reason);
  void form_mg_clusters();
  void form_nmg_clusters();
  void replace_clusters(std::vector<ClusterRecord>& list, std::vector<ClusterRecord> fresh);
  void try_enter_cluster(std::vector<ClusterRecord>& list, VehicleIndex v, NodeId parent);
  void refresh_roles();
  const ClusterRecord* mg_cluster_headed_by(VehicleIndex v) const;
  double weight_in(const ClusterRecord& c, VehicleIndex v) const;
  void log_cluster(const char* event, const ClusterRecord& c, const std::string& extra = {});
  TopologyView topology() const;

  SimulationConfig config_;
  std::shared_ptr<const MobilityModel> mobility_;
  EventQueue queue_;
  Channel channel_;
  EventLog log_;
  MessageFactory factory_;
  RandomStream willingness_rng_;

  std::vector<VehicleState> vehicles_;
  std::vector<RsuState> rsus_;
  std::vector<ClusterRecord> mg_clusters_;
  std::vector<ClusterRecord> nmg_clusters_;
  std::map<VehicleIndex, VehicleIndex> attachments_;          // NMG vehicle -> MG head
  std::map<VehicleIndex, std::set<VehicleIndex>> join_replies_;  // NMG vehicle -> MG heads heard
  std::map<std::uint64_t, RelayGraph> relay_graphs_;             // per emergency msg_id
  std::vector<Injection> injections_;
  std::uint64_t next_cluster_id_ = 1;
  std::uint64_t next_packet_ = 1;
  bool ran_ = false;
};

}  // namespace beamsim
