#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "beamsim/common.hpp"
#include "beamsim/geometry.hpp"

namespace beamsim {

enum class GroupLabel { MG, NMG };

struct RsuMembership {
  GroupLabel label = GroupLabel::NMG;
  std::optional<std::size_t> rsu;  // nearest in-range RSU, MG only
};

// MG iff some RSU lies strictly closer than C; the nearest such RSU wins.
RsuMembership classify_rsu_membership(const Position& vehicle, std::span<const Position> rsus,
                                      double range_c);

// What clustering needs to know about one vehicle at one instant.
struct VehicleSnapshot {
  VehicleIndex id = 0;
  Position position;
  double speed = 0.0;    // m/s
  double heading = 0.0;  // degrees

  Velocity velocity() const { return velocity_from_heading(speed, heading); }
};

// Direction filter between two vehicles. A stopped vehicle has no heading and
// passes against anyone.
bool direction_compatible(const VehicleSnapshot& a, const VehicleSnapshot& b, double delta);

// adjacency[i] lists snapshot indices j != i within `radius` and
// direction-compatible with i. Symmetric.
using Adjacency = std::vector<std::vector<std::size_t>>;
Adjacency neighbor_graph(std::span<const VehicleSnapshot> snapshot, double radius, double delta);

// C for a fast population (s_avg > s_th), C/2 otherwise.
double cluster_radius_for_speed(double s_avg, double s_th, double range_c);

struct WeightFactor {
  double value = 0.0;
  std::size_t neighbor_count = 0;
  double speed_gap = 0.0;
};

// value = neighbor_count / (1 + |speed - s_avg|)
WeightFactor compute_weight_factor(std::size_t neighbor_count, double speed, double s_avg);
// Neighbor count taken from neighbor_graph over the snapshot. Throws
// UnknownVehicle if `vehicle` is not in the snapshot.
WeightFactor compute_weight_factor(VehicleIndex vehicle, std::span<const VehicleSnapshot> snapshot,
                                   double s_avg, double radius, double delta);

struct Candidate {
  VehicleIndex id = 0;
  double weight = 0.0;
};

struct HeadElection {
  VehicleIndex head = 0;
  std::optional<VehicleIndex> secondary;
  friend bool operator==(const HeadElection&, const HeadElection&) = default;
};

// Highest weight is head, second highest is secondary. Ties go to the lower
// vehicle index. Throws PreconditionError on an empty member set.
HeadElection select_cluster_heads(std::span<const Candidate> members);

struct ClusterMember {
  VehicleIndex id = 0;
  SimTime life_deadline;
  double weight = 0.0;  // WT at (re)registration, used for re-election on failover
};

struct ClusterRecord {
  std::uint64_t cluster_id = 0;
  VehicleIndex head = 0;
  std::optional<VehicleIndex> secondary;
  std::vector<ClusterMember> members;  // sorted by id, includes both heads
  double radius = 0.0;
  NodeId parent;  // RSU for MG clusters, MG cluster head for NMG clusters

  bool contains(VehicleIndex v) const;
  const ClusterMember* member(VehicleIndex v) const;
  std::vector<VehicleIndex> member_ids() const;
};

struct FormationParams {
  double range_c = 300.0;
  double threshold_speed = 100.0 * kKmhToMps;
  double delta = kDefaultDirectionDelta;
  SimTime life_timer = SimTime::from_us(30'000'000);
};

struct FormationResult {
  std::vector<ClusterRecord> clusters;
  double average_speed = 0.0;
  double radius = 0.0;
};

// Connected components of the neighbor graph become clusters. A member farther
// than range_c from its elected head cannot hear it, so such members are split
// off and clustered separately. Cluster ids are drawn from next_cluster_id.
FormationResult form_clusters(std::span<const VehicleSnapshot> snapshot, NodeId parent,
                              const FormationParams& params, SimTime now,
                              std::uint64_t& next_cluster_id);

// Keeps previous (head, secondary) assignments when those vehicles land in the
// same fresh cluster and the old head still reaches every member.
void carry_over_heads(std::vector<ClusterRecord>& fresh, std::span<const ClusterRecord> previous,
                      std::span<const VehicleSnapshot> snapshot, double range_c);

enum class MaintenanceEvent { NodeEntered, MemberExited, HeadFailed };

const char* to_string(MaintenanceEvent e);

struct MaintenanceOutcome {
  std::optional<ClusterRecord> cluster;  // empty when dissolved
  std::vector<VehicleIndex> orphaned;    // members needing re-formation
};

// node-entered adds `subject` with a fresh deadline and the given weight;
// member-exited removes it; head-failed promotes the secondary and re-elects a
// secondary among the survivors. A failed head with no secondary dissolves the
// cluster. A member-exited on the head is treated as head-failed.
MaintenanceOutcome maintain(ClusterRecord cluster, MaintenanceEvent event, VehicleIndex subject,
                            SimTime now, SimTime life_timer, double subject_weight = 0.0);

}  // namespace beamsim
