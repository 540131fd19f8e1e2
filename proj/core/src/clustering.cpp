#include "beamsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace beamsim {

RsuMembership classify_rsu_membership(const Position& vehicle, std::span<const Position> rsus,
                                      double range_c) {
  RsuMembership out;
  double best = 0.0;
  for (std::size_t i = 0; i < rsus.size(); ++i) {
    const double d = euclidean_distance(vehicle, rsus[i]);
    if (d < range_c && (!out.rsu || d < best)) {
      out.rsu = i;
      best = d;
    }
  }
  if (out.rsu) out.label = GroupLabel::MG;
  return out;
}

bool direction_compatible(const VehicleSnapshot& a, const VehicleSnapshot& b, double delta) {
  const Velocity va = a.velocity();
  const Velocity vb = b.velocity();
  if (va.is_zero() || vb.is_zero()) return true;
  return same_direction(va, vb, delta);
}

Adjacency neighbor_graph(std::span<const VehicleSnapshot> snapshot, double radius, double delta) {
  Adjacency adj(snapshot.size());
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    for (std::size_t j = i + 1; j < snapshot.size(); ++j) {
      if (euclidean_distance(snapshot[i].position, snapshot[j].position) <= radius &&
          direction_compatible(snapshot[i], snapshot[j], delta)) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  return adj;
}

double cluster_radius_for_speed(double s_avg, double s_th, double range_c) {
  return s_avg > s_th ? range_c : range_c / 2.0;
}

WeightFactor compute_weight_factor(std::size_t neighbor_count, double speed, double s_avg) {
  WeightFactor wf;
  wf.neighbor_count = neighbor_count;
  wf.speed_gap = std::fabs(speed - s_avg);
  wf.value = static_cast<double>(neighbor_count) / (1.0 + wf.speed_gap);
  return wf;
}

WeightFactor compute_weight_factor(VehicleIndex vehicle, std::span<const VehicleSnapshot> snapshot,
                                   double s_avg, double radius, double delta) {
  const auto it = std::find_if(snapshot.begin(), snapshot.end(),
                               [&](const VehicleSnapshot& s) { return s.id == vehicle; });
  if (it == snapshot.end()) throw UnknownVehicle("vehicle not in snapshot");
  std::size_t count = 0;
  for (const auto& other : snapshot) {
    if (other.id == vehicle) continue;
    if (euclidean_distance(it->position, other.position) <= radius &&
        direction_compatible(*it, other, delta)) {
      ++count;
    }
  }
  return compute_weight_factor(count, it->speed, s_avg);
}

namespace {

// Strict "ranks higher" order used by the election: weight, then lower id.
bool outranks(const Candidate& a, const Candidate& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.id < b.id;
}

}  // namespace

HeadElection select_cluster_heads(std::span<const Candidate> members) {
  if (members.empty()) throw PreconditionError("select_cluster_heads: empty member set");
  const Candidate* first = &members[0];
  const Candidate* second = nullptr;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const Candidate* c = &members[i];
    if (outranks(*c, *first)) {
      second = first;
      first = c;
    } else if (second == nullptr || outranks(*c, *second)) {
      second = c;
    }
  }
  HeadElection out{first->id, std::nullopt};
  if (second) out.secondary = second->id;
  return out;
}

bool ClusterRecord::contains(VehicleIndex v) const { return member(v) != nullptr; }

const ClusterMember* ClusterRecord::member(VehicleIndex v) const {
  const auto it = std::lower_bound(members.begin(), members.end(), v,
                                   [](const ClusterMember& m, VehicleIndex id) { return m.id < id; });
  if (it == members.end() || it->id != v) return nullptr;
  return &*it;
}

std::vector<VehicleIndex> ClusterRecord::member_ids() const {
  std::vector<VehicleIndex> ids;
  ids.reserve(members.size());
  for (const auto& m : members) ids.push_back(m.id);
  return ids;
}

namespace {

std::vector<Candidate> candidates_of(const std::vector<ClusterMember>& members,
                                     std::optional<VehicleIndex> exclude = std::nullopt) {
  std::vector<Candidate> out;
  for (const auto& m : members) {
    if (exclude && m.id == *exclude) continue;
    out.push_back({m.id, m.weight});
  }
  return out;
}

std::optional<VehicleIndex> best_secondary(const std::vector<ClusterMember>& members,
                                           VehicleIndex head) {
  const auto rest = candidates_of(members, head);
  if (rest.empty()) return std::nullopt;
  return select_cluster_heads(rest).head;
}

}  // namespace

FormationResult form_clusters(std::span<const VehicleSnapshot> snapshot, NodeId parent,
                              const FormationParams& params, SimTime now,
                              std::uint64_t& next_cluster_id) {
  FormationResult result;
  if (snapshot.empty()) return result;

  std::vector<double> speeds;
  speeds.reserve(snapshot.size());
  for (const auto& s : snapshot) speeds.push_back(s.speed);
  result.average_speed = average_speed(speeds);
  result.radius =
      cluster_radius_for_speed(result.average_speed, params.threshold_speed, params.range_c);

  // Work in id order so components and elections are independent of input order.
  std::vector<std::size_t> order(snapshot.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return snapshot[a].id < snapshot[b].id; });
  std::vector<VehicleSnapshot> sorted;
  sorted.reserve(snapshot.size());
  for (auto i : order) sorted.push_back(snapshot[i]);

  const Adjacency adj = neighbor_graph(sorted, result.radius, params.delta);
  std::vector<double> weight(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    weight[i] = compute_weight_factor(adj[i].size(), sorted[i].speed, result.average_speed).value;
  }

  // Components over the vertices still unassigned. Each pass elects a head
  // per component and keeps only the members within radio range of it.
  std::vector<bool> assigned(sorted.size(), false);
  std::size_t remaining = sorted.size();
  while (remaining > 0) {
    std::vector<int> comp(sorted.size(), -1);
    std::vector<std::vector<std::size_t>> components;
    for (std::size_t s = 0; s < sorted.size(); ++s) {
      if (assigned[s] || comp[s] >= 0) continue;
      const int cid = static_cast<int>(components.size());
      components.emplace_back();
      std::vector<std::size_t> stack{s};
      comp[s] = cid;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        components[cid].push_back(u);
        for (std::size_t w : adj[u]) {
          if (!assigned[w] && comp[w] < 0) {
            comp[w] = cid;
            stack.push_back(w);
          }
        }
      }
    }

    for (auto& component : components) {
      std::sort(component.begin(), component.end());
      std::vector<Candidate> cands;
      for (auto i : component) cands.push_back({sorted[i].id, weight[i]});
      const VehicleIndex head_id = select_cluster_heads(cands).head;
      const auto head_it = std::find_if(component.begin(), component.end(),
                                        [&](std::size_t i) { return sorted[i].id == head_id; });
      const Position head_pos = sorted[*head_it].position;

      ClusterRecord rec;
      rec.cluster_id = next_cluster_id++;
      rec.head = head_id;
      rec.radius = result.radius;
      rec.parent = parent;
      for (auto i : component) {
        if (euclidean_distance(sorted[i].position, head_pos) <= params.range_c) {
          rec.members.push_back({sorted[i].id, now + params.life_timer, weight[i]});
          assigned[i] = true;
          --remaining;
        }
      }
      rec.secondary = best_secondary(rec.members, rec.head);
      result.clusters.push_back(std::move(rec));
    }
  }

  std::sort(result.clusters.begin(), result.clusters.end(),
            [](const ClusterRecord& a, const ClusterRecord& b) {
              return a.members.front().id < b.members.front().id;
            });
  return result;
}

void carry_over_heads(std::vector<ClusterRecord>& fresh, std::span<const ClusterRecord> previous,
                      std::span<const VehicleSnapshot> snapshot, double range_c) {
  std::map<VehicleIndex, Position> pos;
  for (const auto& s : snapshot) pos[s.id] = s.position;

  for (auto& cluster : fresh) {
    const ClusterRecord* keep = nullptr;
    Candidate keep_rank{};
    for (const auto& old : previous) {
      const ClusterMember* m = cluster.member(old.head);
      if (m == nullptr) continue;
      const auto hp = pos.find(old.head);
      if (hp == pos.end()) continue;
      const bool reaches_all = std::all_of(
          cluster.members.begin(), cluster.members.end(), [&](const ClusterMember& cm) {
            const auto p = pos.find(cm.id);
            return p != pos.end() && euclidean_distance(p->second, hp->second) <= range_c;
          });
      if (!reaches_all) continue;
      const Candidate rank{old.head, m->weight};
      if (keep == nullptr || outranks(rank, keep_rank)) {
        keep = &old;
        keep_rank = rank;
      }
    }
    if (keep == nullptr) continue;

    cluster.head = keep->head;
    cluster.cluster_id = keep->cluster_id;
    if (keep->secondary && *keep->secondary != cluster.head && cluster.contains(*keep->secondary)) {
      cluster.secondary = keep->secondary;
    } else {
      cluster.secondary = best_secondary(cluster.members, cluster.head);
    }
  }
}

const char* to_string(MaintenanceEvent e) {
  switch (e) {
    case MaintenanceEvent::NodeEntered:
      return "node-entered";
    case MaintenanceEvent::MemberExited:
      return "member-exited";
    case MaintenanceEvent::HeadFailed:
      return "head-failed";
  }
  return "?";
}

MaintenanceOutcome maintain(ClusterRecord cluster, MaintenanceEvent event, VehicleIndex subject,
                            SimTime now, SimTime life_timer, double subject_weight) {
  MaintenanceOutcome out;
  auto& members = cluster.members;
  const auto find = [&](VehicleIndex v) {
    return std::lower_bound(members.begin(), members.end(), v,
                            [](const ClusterMember& m, VehicleIndex id) { return m.id < id; });
  };

  if (event == MaintenanceEvent::MemberExited && subject == cluster.head) {
    event = MaintenanceEvent::HeadFailed;
  }

  switch (event) {
    case MaintenanceEvent::NodeEntered: {
      const auto it = find(subject);
      if (it != members.end() && it->id == subject) {
        it->life_deadline = now + life_timer;
        it->weight = subject_weight;
      } else {
        members.insert(it, {subject, now + life_timer, subject_weight});
      }
      if (!cluster.secondary) cluster.secondary = best_secondary(members, cluster.head);
      break;
    }
    case MaintenanceEvent::MemberExited: {
      const auto it = find(subject);
      if (it == members.end() || it->id != subject) break;
      members.erase(it);
      if (cluster.secondary == subject) cluster.secondary = best_secondary(members, cluster.head);
      break;
    }
    case MaintenanceEvent::HeadFailed: {
      const auto it = find(cluster.head);
      if (it != members.end() && it->id == cluster.head) members.erase(it);
      if (!cluster.secondary) {
        for (const auto& m : members) out.orphaned.push_back(m.id);
        return out;
      }
      cluster.head = *cluster.secondary;
      cluster.secondary = best_secondary(members, cluster.head);
      break;
    }
  }
  out.cluster = std::move(cluster);
  return out;
}

}  // namespace beamsim
