#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace beamsim {

// Simulated time in integer microseconds. Timer arithmetic stays exact, so a
// 1 s periodic timer fires at exactly 1.000000 s intervals.
struct SimTime {
  std::int64_t us = 0;

  static constexpr SimTime from_us(std::int64_t v) { return SimTime{v}; }
  static SimTime from_seconds(double s);
  double seconds() const { return static_cast<double>(us) / 1e6; }

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return {a.us + b.us}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return {a.us - b.us}; }
  SimTime& operator+=(SimTime o) {
    us += o.us;
    return *this;
  }
};

// "12.345678" with exactly six fractional digits.
std::string format_time(SimTime t);

// Network node: a vehicle (dense index, ordered by natural id order) or an RSU.
struct NodeId {
  enum class Kind : std::uint8_t { Vehicle, Rsu };
  Kind kind = Kind::Vehicle;
  std::uint32_t index = 0;

  static constexpr NodeId vehicle(std::uint32_t i) { return {Kind::Vehicle, i}; }
  static constexpr NodeId rsu(std::uint32_t i) { return {Kind::Rsu, i}; }
  bool is_vehicle() const { return kind == Kind::Vehicle; }
  bool is_rsu() const { return kind == Kind::Rsu; }

  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

using VehicleIndex = std::uint32_t;

// Error hierarchy. Each operation's documented failure maps onto one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInterval : public Error {
 public:
  using Error::Error;
};
class EmptyPopulation : public Error {
 public:
  using Error::Error;
};
class UndefinedHeading : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};
class OrderingError : public Error {
 public:
  using Error::Error;
};
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};
class UnknownVehicle : public Error {
 public:
  using Error::Error;
};
class UnknownMessage : public Error {
 public:
  using Error::Error;
};
class PreconditionError : public Error {
 public:
  using Error::Error;
};
class SchedulingError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

// Numeric-aware ordering of identifiers: "v2" < "v10".
bool natural_less(const std::string& a, const std::string& b);

inline constexpr double kKmhToMps = 1000.0 / 3600.0;

}  // namespace beamsim
