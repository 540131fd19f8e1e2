#pragma once

#include <span>

#include "beamsim/common.hpp"

namespace beamsim {

struct Position {
  double x = 0.0;  // meters
  double y = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

// Displacement over a sampling interval, or any vector with the same
// direction. A zero vector has no heading.
struct Velocity {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const Velocity&, const Velocity&) = default;

  double magnitude() const;
  bool is_zero() const { return dx == 0.0 && dy == 0.0; }
};

inline constexpr double kDefaultDirectionDelta = 18.0;  // degrees

double euclidean_distance(const Position& a, const Position& b);

// Throws InvalidInterval unless t2 > t1.
double displacement_speed(const Position& p1, const Position& p2, double t1, double t2);

// Throws EmptyPopulation for an empty list.
double average_speed(std::span<const double> speeds);

// Angle in degrees within [0, 180]. Throws UndefinedHeading for a zero vector.
double heading_angle_between(const Velocity& u, const Velocity& v);

// True iff the headings differ by at most delta degrees.
bool same_direction(const Velocity& u, const Velocity& v, double delta = kDefaultDirectionDelta);

// Velocity vector for a speed (m/s) and heading (degrees, 0 = +x, CCW positive).
Velocity velocity_from_heading(double speed, double heading_deg);

// Smallest absolute difference between two headings, in [0, 180].
double heading_difference(double a_deg, double b_deg);

}  // namespace beamsim
