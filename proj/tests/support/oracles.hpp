#pragma once

// Deliberately naive re-implementations used as test oracles. Nothing here
// calls into the library code it checks.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

double distance(double x1, double y1, double x2, double y2);

// Literal textbook form: arccos of the normalized dot product, in degrees.
double angle_deg(double ux, double uy, double vx, double vy);

double mean(const std::vector<double>& xs);

struct Candidate {
  std::uint32_t id;
  double weight;
};

// Exhaustive: try every member as head, keep the best; then again without it.
std::pair<std::uint32_t, std::optional<std::uint32_t>> elect(const std::vector<Candidate>& members);

// Everything below reads raw `t|kind|node|detail` lines with its own parser.
struct RawRecord {
  std::int64_t us = 0;
  std::string kind;
  std::string node;
  std::map<std::string, std::string> kv;
};
RawRecord parse(const std::string& line);
std::vector<RawRecord> parse_all(const std::string& log);
std::int64_t to_us(const std::string& t);

struct WindowStats {
  double throughput_kbps = 0.0;
  std::optional<double> pdr_pct;
  std::optional<double> delay_ms;
};

// Single pass over the raw log for one window [start_us, stop_us).
WindowStats window_stats(const std::vector<RawRecord>& log, std::int64_t start_us,
                         std::int64_t stop_us);

// Vehicles that got message `msg` delivered at or before t_us.
std::set<std::string> receivers(const std::vector<RawRecord>& log, const std::string& msg,
                                std::int64_t t_us);

std::vector<std::string> vehicles(const std::vector<RawRecord>& log);

// Membership reconstructed from register/deregister, cluster and attach/detach
// records up to and including t_us.
struct Membership {
  std::map<std::string, std::set<std::string>> rsu_members;  // rsu -> vehicles
  struct Cluster {
    std::string parent;
    std::string head;
    std::string sec;
    std::vector<std::string> members;
  };
  std::map<std::string, Cluster> clusters;          // cid -> cluster
  std::map<std::string, std::string> attachments;   // vehicle -> head
  std::set<std::string> failed;
};
Membership replay(const std::vector<RawRecord>& log, std::int64_t t_us);

using Graph = std::map<std::string, std::set<std::string>>;
std::set<std::string> bfs(const Graph& g, const std::string& start);
// "a>b,c>d" edge lists as logged by topology records.
Graph parse_edges(const std::string& edges);

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace oracle
