#include "beamsim/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace beamsim {

SimTime SimTime::from_seconds(double s) { return SimTime{std::llround(s * 1e6)}; }

std::string format_time(SimTime t) {
  const std::int64_t whole = t.us / 1'000'000;
  std::int64_t frac = t.us % 1'000'000;
  const bool negative = t.us < 0;
  if (frac < 0) frac = -frac;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", (negative && whole == 0) ? "-" : "",
                static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      // strip leading zeros, then compare by length, then lexically
      std::size_t is = i;
      std::size_t js = j;
      while (is + 1 < ie && a[is] == '0') ++is;
      while (js + 1 < je && b[js] == '0') ++js;
      const std::size_t la = ie - is;
      const std::size_t lb = je - js;
      if (la != lb) return la < lb;
      const int c = a.compare(is, la, b, js, lb);
      if (c != 0) return c < 0;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

double Velocity::magnitude() const { return std::hypot(dx, dy); }

double euclidean_distance(const Position& a, const Position& b) {
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  return std::sqrt(ex * ex + ey * ey);
}

double displacement_speed(const Position& p1, const Position& p2, double t1, double t2) {
  if (!(t2 > t1)) throw InvalidInterval("displacement_speed: t2 must exceed t1");
  return euclidean_distance(p1, p2) / (t2 - t1);
}

double average_speed(std::span<const double> speeds) {
  if (speeds.empty()) throw EmptyPopulation("average_speed: empty speed list");
  double sum = 0.0;
  for (double s : speeds) sum += s;
  return sum / static_cast<double>(speeds.size());
}

double heading_angle_between(const Velocity& u, const Velocity& v) {
  const double nu = std::sqrt(u.dx * u.dx + u.dy * u.dy);
  const double nv = std::sqrt(v.dx * v.dx + v.dy * v.dy);
  if (nu == 0.0 || nv == 0.0) throw UndefinedHeading("heading_angle_between: zero-magnitude vector");
  // Same angle as arccos(u.v / |u||v|) clamped to [-1, 1], but atan2 stays
  // well conditioned near 0 and 180 degrees.
  const double dot = u.dx * v.dx + u.dy * v.dy;
  const double cross = u.dx * v.dy - u.dy * v.dx;
  return std::atan2(std::fabs(cross), dot) * 180.0 / std::numbers::pi;
}

bool same_direction(const Velocity& u, const Velocity& v, double delta) {
  // acos(cos(x)) round-trips within a few ulps; a vector built at exactly
  // delta degrees must still pass.
  constexpr double kAngleSlack = 1e-9;
  return heading_angle_between(u, v) <= delta + kAngleSlack;
}

Velocity velocity_from_heading(double speed, double heading_deg) {
  const double r = heading_deg * std::numbers::pi / 180.0;
  return {speed * std::cos(r), speed * std::sin(r)};
}

double heading_difference(double a_deg, double b_deg) {
  double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
  if (d > 180.0) d = 360.0 - d;
  return d;
}

}  // namespace beamsim
