#include <gtest/gtest.h>

#include <map>
#include <set>

#include "beamsim/clustering.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace beamsim;

namespace {

const std::vector<Position> kRsus{{200, 200}, {1200, 200}};

VehicleSnapshot at(VehicleIndex id, double x, double y, double speed, double heading) {
  return {id, {x, y}, speed, heading};
}

// Brute-force WT for one vehicle, written from the definition.
double brute_weight(const std::vector<VehicleSnapshot>& snap, std::size_t i, double radius,
                    double delta, double s_avg) {
  int n = 0;
  for (std::size_t j = 0; j < snap.size(); ++j) {
    if (j == i) continue;
    const double d = oracle::distance(snap[i].position.x, snap[i].position.y, snap[j].position.x,
                                      snap[j].position.y);
    bool dir_ok = true;
    if (snap[i].speed > 0 && snap[j].speed > 0) {
      const auto u = snap[i].velocity();
      const auto v = snap[j].velocity();
      dir_ok = oracle::angle_deg(u.dx, u.dy, v.dx, v.dy) <= delta + 1e-9;
    }
    if (d <= radius && dir_ok) ++n;
  }
  return n / (1.0 + std::abs(snap[i].speed - s_avg));
}

}  // namespace

TEST(Membership, Examples) {
  auto m = classify_rsu_membership({300, 200}, kRsus, 300);
  EXPECT_EQ(m.label, GroupLabel::MG);
  EXPECT_EQ(m.rsu, 0u);
  m = classify_rsu_membership({700, 200}, kRsus, 300);
  EXPECT_EQ(m.label, GroupLabel::NMG);
  EXPECT_FALSE(m.rsu);
  m = classify_rsu_membership({500, 200}, kRsus, 300);
  EXPECT_EQ(m.label, GroupLabel::NMG);
  m = classify_rsu_membership({1100, 200}, kRsus, 300);
  EXPECT_EQ(m.rsu, 1u);
}

TEST(Membership, NearestInRangeRsuWins) {
  const std::vector<Position> close{{0, 0}, {100, 0}};
  EXPECT_EQ(classify_rsu_membership({70, 0}, close, 300).rsu, 1u);
  EXPECT_EQ(classify_rsu_membership({30, 0}, close, 300).rsu, 0u);
}

TEST(Membership, PartitionProperty) {
  gen::Gen g(31);
  for (int i = 0; i < 1000; ++i) {
    const auto p = g.position();
    const auto m = classify_rsu_membership(p, kRsus, 300);
    bool any = false;
    for (const auto& r : kRsus) any = any || oracle::distance(p.x, p.y, r.x, r.y) < 300;
    EXPECT_EQ(m.label == GroupLabel::MG, any);
    EXPECT_EQ(m.rsu.has_value(), any);
  }
}

TEST(NeighborGraph, Examples) {
  std::vector<VehicleSnapshot> s{at(0, 0, 0, 20, 0), at(1, 0, 0, 20, 10)};
  auto adj = neighbor_graph(s, 300, 18);
  EXPECT_EQ(adj[0], std::vector<std::size_t>{1});
  s[1].heading = 180;
  adj = neighbor_graph(s, 300, 18);
  EXPECT_TRUE(adj[0].empty());
  s = {at(0, 0, 0, 20, 0), at(1, 400, 0, 20, 0)};
  adj = neighbor_graph(s, 300, 18);
  EXPECT_TRUE(adj[0].empty());
}

TEST(NeighborGraph, DirectionBoundaryAt18Degrees) {
  std::vector<VehicleSnapshot> s{at(0, 0, 0, 25, 0), at(1, 50, 0, 25, 18.0)};
  EXPECT_EQ(neighbor_graph(s, 300, 18)[0].size(), 1u);
  s[1].heading = 18.1;
  EXPECT_TRUE(neighbor_graph(s, 300, 18)[0].empty());
}

TEST(NeighborGraph, StoppedVehicleIsDirectionNeutral) {
  std::vector<VehicleSnapshot> s{at(0, 0, 0, 0, 0), at(1, 50, 0, 25, 180)};
  EXPECT_EQ(neighbor_graph(s, 300, 18)[0].size(), 1u);
}

TEST(NeighborGraph, SymmetricAndMatchesBruteForce) {
  gen::Gen g(32);
  for (int round = 0; round < 200; ++round) {
    const auto snap = g.snapshot(static_cast<std::size_t>(g.integer(1, 25)));
    const double radius = g.coin() ? 300.0 : 150.0;
    const auto adj = neighbor_graph(snap, radius, 18.0);
    for (std::size_t i = 0; i < snap.size(); ++i) {
      for (std::size_t j : adj[i]) {
        EXPECT_NE(std::find(adj[j].begin(), adj[j].end(), i), adj[j].end());
      }
      EXPECT_DOUBLE_EQ(static_cast<double>(adj[i].size()), brute_weight(snap, i, radius, 18.0, snap[i].speed));
    }
  }
}

TEST(Radius, SpeedThreshold) {
  EXPECT_EQ(cluster_radius_for_speed(30.0, 27.78, 300), 300.0);
  EXPECT_EQ(cluster_radius_for_speed(20.0, 27.78, 300), 150.0);
  EXPECT_EQ(cluster_radius_for_speed(27.78, 27.78, 300), 150.0);
}

TEST(WeightFactor, Examples) {
  EXPECT_DOUBLE_EQ(compute_weight_factor(4, 25.0, 25.0).value, 4.0);
  EXPECT_DOUBLE_EQ(compute_weight_factor(4, 28.0, 25.0).value, 1.0);
  EXPECT_DOUBLE_EQ(compute_weight_factor(0, 31.0, 25.0).value, 0.0);
  const auto wf = compute_weight_factor(3, 20.0, 25.0);
  EXPECT_EQ(wf.neighbor_count, 3u);
  EXPECT_DOUBLE_EQ(wf.speed_gap, 5.0);
}

TEST(WeightFactor, SnapshotFormMatchesBruteForce) {
  gen::Gen g(33);
  for (int round = 0; round < 200; ++round) {
    const auto snap = g.snapshot(static_cast<std::size_t>(g.integer(1, 20)));
    const double s_avg = g.real(15, 40);
    for (std::size_t i = 0; i < snap.size(); ++i) {
      const auto wf = compute_weight_factor(snap[i].id, snap, s_avg, 300.0, 18.0);
      EXPECT_DOUBLE_EQ(wf.value, brute_weight(snap, i, 300.0, 18.0, s_avg));
    }
  }
  const auto snap = g.snapshot(3);
  EXPECT_THROW(compute_weight_factor(99, snap, 20.0, 300.0, 18.0), UnknownVehicle);
}

TEST(Election, Examples) {
  std::vector<Candidate> c{{1, 3.2}, {2, 5.1}, {3, 2.0}};
  EXPECT_EQ(select_cluster_heads(c), (HeadElection{2, 1}));
  c = {{1, 5.1}, {2, 5.1}};
  EXPECT_EQ(select_cluster_heads(c), (HeadElection{1, 2}));
  c = {{2, 5.1}, {1, 5.1}};
  EXPECT_EQ(select_cluster_heads(c), (HeadElection{1, 2}));
  c = {{7, 0.0}};
  EXPECT_EQ(select_cluster_heads(c), (HeadElection{7, std::nullopt}));
  EXPECT_THROW(select_cluster_heads(std::vector<Candidate>{}), PreconditionError);
}

TEST(Election, MatchesExhaustiveArgmax) {
  gen::Gen g(34);
  for (int round = 0; round < 1000; ++round) {
    const auto c = g.candidates(static_cast<std::size_t>(g.integer(1, 25)));
    std::vector<oracle::Candidate> o;
    for (const auto& x : c) o.push_back({x.id, x.weight});
    const auto want = oracle::elect(o);
    const auto got = select_cluster_heads(c);
    EXPECT_EQ(got.head, want.first);
    EXPECT_EQ(got.secondary, want.second);
  }
}

TEST(Election, InvariantUnderNeighborCountScaling) {
  gen::Gen g(35);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 15));
    const double s_avg = g.real(20, 30);
    std::vector<std::size_t> counts(n);
    std::vector<double> speeds(n);
    for (std::size_t i = 0; i < n; ++i) {
      counts[i] = static_cast<std::size_t>(g.integer(0, 10));
      speeds[i] = g.real(15, 35);
    }
    const auto k = static_cast<std::size_t>(g.integer(2, 7));
    std::vector<Candidate> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = static_cast<VehicleIndex>(i);
      a.push_back({id, compute_weight_factor(counts[i], speeds[i], s_avg).value});
      b.push_back({id, compute_weight_factor(counts[i] * k, speeds[i], s_avg).value});
    }
    EXPECT_EQ(select_cluster_heads(a), select_cluster_heads(b));
  }
}

TEST(Formation, Examples) {
  std::uint64_t next = 1;
  const NodeId rsu = NodeId::rsu(0);
  FormationParams p;
  std::vector<VehicleSnapshot> three{at(0, 100, 200, 25, 0), at(1, 150, 200, 25, 0),
                                     at(2, 200, 200, 25, 0)};
  auto r = form_clusters(three, rsu, p, SimTime::from_us(5'000'000), next);
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].members.size(), 3u);
  // all three are mutual neighbors with equal WT: lowest ids win
  EXPECT_EQ(r.clusters[0].head, 0u);
  EXPECT_EQ(r.clusters[0].secondary, 1u);
  EXPECT_EQ(r.clusters[0].members[0].life_deadline, SimTime::from_us(35'000'000));
  EXPECT_EQ(r.radius, 150.0);

  std::vector<VehicleSnapshot> apart{at(0, 0, 200, 25, 0), at(1, 1000, 200, 25, 0)};
  r = form_clusters(apart, rsu, p, SimTime{}, next);
  ASSERT_EQ(r.clusters.size(), 2u);
  EXPECT_FALSE(r.clusters[0].secondary);
  EXPECT_FALSE(r.clusters[1].secondary);
  EXPECT_NE(r.clusters[0].cluster_id, r.clusters[1].cluster_id);

  EXPECT_TRUE(form_clusters(std::vector<VehicleSnapshot>{}, rsu, p, SimTime{}, next).clusters.empty());
}

TEST(Formation, FastPopulationUsesFullRange) {
  std::uint64_t next = 1;
  std::vector<VehicleSnapshot> s{at(0, 0, 200, 30, 0), at(1, 250, 200, 30, 0)};
  const auto r = form_clusters(s, NodeId::rsu(0), FormationParams{}, SimTime{}, next);
  EXPECT_EQ(r.radius, 300.0);
  EXPECT_EQ(r.clusters.size(), 1u);
}

// Partition, in-range heads, optimal election, and component containment on
// random snapshots.
TEST(Formation, Properties) {
  gen::Gen g(36);
  FormationParams p;
  for (int round = 0; round < 300; ++round) {
    auto snap = g.snapshot(static_cast<std::size_t>(g.integer(1, 25)), g.coin() ? 600.0 : 2500.0);
    std::uint64_t next = 1;
    const auto r = form_clusters(snap, NodeId::rsu(0), p, SimTime{}, next);

    std::vector<double> speeds;
    for (const auto& s : snap) speeds.push_back(s.speed);
    const double s_avg = oracle::mean(speeds);
    const double radius = s_avg > p.threshold_speed ? p.range_c : p.range_c / 2;
    EXPECT_EQ(r.radius, radius);

    std::map<VehicleIndex, std::size_t> idx;
    for (std::size_t i = 0; i < snap.size(); ++i) idx[snap[i].id] = i;
    // component label per vehicle from an oracle flood fill
    oracle::Graph graph;
    for (std::size_t i = 0; i < snap.size(); ++i) {
      graph[std::to_string(i)];
      for (std::size_t j = 0; j < snap.size(); ++j) {
        if (i == j) continue;
        const double d = oracle::distance(snap[i].position.x, snap[i].position.y,
                                          snap[j].position.x, snap[j].position.y);
        const bool dir = snap[i].speed == 0 || snap[j].speed == 0 ||
                         oracle::angle_deg(snap[i].velocity().dx, snap[i].velocity().dy,
                                           snap[j].velocity().dx, snap[j].velocity().dy) <= 18.0 + 1e-9;
        if (d <= radius && dir) graph[std::to_string(i)].insert(std::to_string(j));
      }
    }

    std::set<VehicleIndex> seen;
    for (const auto& c : r.clusters) {
      ASSERT_FALSE(c.members.empty());
      EXPECT_TRUE(c.contains(c.head));
      if (c.secondary) EXPECT_NE(*c.secondary, c.head);
      EXPECT_EQ(c.radius, radius);
      const auto comp = oracle::bfs(graph, std::to_string(idx[c.head]));
      std::vector<oracle::Candidate> cands;
      for (const auto& m : c.members) {
        EXPECT_TRUE(seen.insert(m.id).second) << "vehicle in two clusters";
        const auto& sm = snap[idx[m.id]];
        const auto& sh = snap[idx[c.head]];
        EXPECT_LE(oracle::distance(sm.position.x, sm.position.y, sh.position.x, sh.position.y), p.range_c);
        EXPECT_TRUE(comp.count(std::to_string(idx[m.id])));
        const double w = brute_weight(snap, idx[m.id], radius, 18.0, s_avg);
        EXPECT_NEAR(m.weight, w, 1e-12);
        cands.push_back({m.id, m.weight});
      }
      const auto want = oracle::elect(cands);
      EXPECT_EQ(c.head, want.first);
      EXPECT_EQ(c.secondary, want.second);
    }
    EXPECT_EQ(seen.size(), snap.size());
  }
}

TEST(Formation, IndependentOfInputOrder) {
  gen::Gen g(37);
  FormationParams p;
  for (int round = 0; round < 100; ++round) {
    auto snap = g.snapshot(static_cast<std::size_t>(g.integer(2, 20)));
    std::uint64_t n1 = 1, n2 = 1;
    const auto a = form_clusters(snap, NodeId::rsu(0), p, SimTime{}, n1);
    std::shuffle(snap.begin(), snap.end(), g.engine());
    const auto b = form_clusters(snap, NodeId::rsu(0), p, SimTime{}, n2);
    ASSERT_EQ(a.clusters.size(), b.clusters.size());
    for (std::size_t i = 0; i < a.clusters.size(); ++i) {
      EXPECT_EQ(a.clusters[i].member_ids(), b.clusters[i].member_ids());
      EXPECT_EQ(a.clusters[i].head, b.clusters[i].head);
      EXPECT_EQ(a.clusters[i].secondary, b.clusters[i].secondary);
    }
  }
}

TEST(CarryOver, KeepsPreviousHeadWhenItStillReachesEveryone) {
  std::uint64_t next = 1;
  FormationParams p;
  std::vector<VehicleSnapshot> s{at(0, 50, 200, 20, 0), at(1, 150, 200, 20, 0),
                                 at(2, 250, 200, 20, 0)};
  auto first = form_clusters(s, NodeId::rsu(0), p, SimTime{}, next).clusters;
  ASSERT_EQ(first.size(), 1u);
  ASSERT_EQ(first[0].head, 1u);
  // v0 moves ahead; fresh election would pick someone else
  s = {at(0, 180, 200, 20, 0), at(1, 150, 200, 20, 0), at(2, 250, 200, 20, 0),
       at(3, 230, 200, 20, 0)};
  auto fresh = form_clusters(s, NodeId::rsu(0), p, SimTime{}, next).clusters;
  ASSERT_EQ(fresh.size(), 1u);
  ASSERT_EQ(fresh[0].head, 0u);
  carry_over_heads(fresh, first, s, p.range_c);
  EXPECT_EQ(fresh[0].head, 1u);
  EXPECT_EQ(fresh[0].cluster_id, first[0].cluster_id);
  EXPECT_EQ(fresh[0].secondary, first[0].secondary);

  // an old head that cannot reach every member is not kept
  s = {at(0, 0, 200, 30, 0), at(1, 200, 200, 30, 0), at(2, 400, 200, 30, 0)};
  auto wide = form_clusters(s, NodeId::rsu(0), p, SimTime{}, next).clusters;
  ASSERT_EQ(wide.size(), 1u);
  ASSERT_EQ(wide[0].head, 1u);
  std::vector<ClusterRecord> prev{first[0]};
  prev[0].head = 0;
  carry_over_heads(wide, prev, s, p.range_c);
  EXPECT_EQ(wide[0].head, 1u);
}

TEST(Maintain, HeadFailedPromotesSecondary) {
  ClusterRecord c;
  c.cluster_id = 4;
  c.head = 2;
  c.secondary = 1;
  c.members = {{1, {}, 2.0}, {2, {}, 3.0}, {3, {}, 1.0}};
  const auto out = maintain(c, MaintenanceEvent::HeadFailed, 2, SimTime{}, SimTime::from_us(30'000'000));
  ASSERT_TRUE(out.cluster);
  EXPECT_EQ(out.cluster->head, 1u);
  EXPECT_EQ(out.cluster->secondary, 3u);
  EXPECT_EQ(out.cluster->member_ids(), (std::vector<VehicleIndex>{1, 3}));
  EXPECT_EQ(out.cluster->cluster_id, 4u);
}

TEST(Maintain, MemberExitedAndNodeEntered) {
  ClusterRecord c;
  c.head = 2;
  c.secondary = 1;
  c.members = {{1, {}, 2.0}, {2, {}, 3.0}, {3, {}, 1.0}};
  auto out = maintain(c, MaintenanceEvent::MemberExited, 3, SimTime{}, SimTime::from_us(30'000'000));
  EXPECT_EQ(out.cluster->member_ids(), (std::vector<VehicleIndex>{1, 2}));
  EXPECT_EQ(out.cluster->head, 2u);
  EXPECT_EQ(out.cluster->secondary, 1u);

  out = maintain(c, MaintenanceEvent::NodeEntered, 9, SimTime::from_us(100'000'000),
                 SimTime::from_us(30'000'000), 0.5);
  ASSERT_TRUE(out.cluster->member(9));
  EXPECT_EQ(out.cluster->member(9)->life_deadline, SimTime::from_us(130'000'000));
}

TEST(Maintain, HeadFailedWithoutSecondaryDissolves) {
  ClusterRecord c;
  c.head = 5;
  c.members = {{5, {}, 0.0}};
  const auto out = maintain(c, MaintenanceEvent::HeadFailed, 5, SimTime{}, SimTime::from_us(1));
  EXPECT_FALSE(out.cluster);
  EXPECT_TRUE(out.orphaned.empty());
}

TEST(Maintain, FailoverTouchesOnlyHeadFields) {
  gen::Gen g(38);
  for (int round = 0; round < 500; ++round) {
    const auto cands = g.candidates(static_cast<std::size_t>(g.integer(2, 25)));
    ClusterRecord c;
    for (const auto& x : cands) c.members.push_back({x.id, SimTime::from_us(g.integer(0, 1000)), x.weight});
    std::sort(c.members.begin(), c.members.end(),
              [](const ClusterMember& a, const ClusterMember& b) { return a.id < b.id; });
    const auto e = select_cluster_heads(cands);
    c.head = e.head;
    c.secondary = e.secondary;

    const auto out = maintain(c, MaintenanceEvent::HeadFailed, c.head, SimTime{}, SimTime::from_us(1));
    ASSERT_TRUE(out.cluster);
    auto expected = c.member_ids();
    expected.erase(std::find(expected.begin(), expected.end(), c.head));
    EXPECT_EQ(out.cluster->member_ids(), expected);
    EXPECT_EQ(out.cluster->head, *c.secondary);
    // deadlines untouched
    for (const auto& m : out.cluster->members) EXPECT_EQ(m.life_deadline, c.member(m.id)->life_deadline);
    std::vector<oracle::Candidate> rest;
    for (const auto& m : out.cluster->members) {
      if (m.id != out.cluster->head) rest.push_back({m.id, m.weight});
    }
    if (rest.empty()) {
      EXPECT_FALSE(out.cluster->secondary);
    } else {
      EXPECT_EQ(out.cluster->secondary, oracle::elect(rest).first);
    }
  }
}
