#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "beamsim/geometry.hpp"

namespace beamsim {

struct TraceSample {
  double time = 0.0;  // seconds
  std::string vehicle_id;
  Position position;
  double speed = 0.0;    // m/s
  double heading = 0.0;  // degrees in [0, 360), 0 = +x, CCW positive
  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

inline constexpr const char* kTraceHeader = "time_s,vehicle_id,x_m,y_m,speed_mps,heading_deg";

struct SyntheticParams {
  double area_width = 2850.46;
  double area_height = 2000.04;
  std::vector<double> lane_offsets{200.0};
  double speed_min = 80.0 * kKmhToMps;  // m/s
  double speed_max = 120.0 * kKmhToMps;
  std::size_t vehicle_count = 25;
  std::uint64_t seed = 0;
};

struct Kinematics {
  Position position;
  double speed = 0.0;
  double heading = 0.0;
};

// Per-vehicle trajectories, either replayed from a trace or generated in
// closed form. Immutable once built.
class MobilityModel {
 public:
  enum class Mode { Trace, Synthetic };

  static MobilityModel from_samples(std::vector<TraceSample> samples);
  static MobilityModel synthetic(const SyntheticParams& params);

  Mode mode() const { return mode_; }
  std::size_t vehicle_count() const { return ids_.size(); }
  // Sorted in natural id order; position in this list is the VehicleIndex.
  const std::vector<std::string>& vehicle_ids() const { return ids_; }
  std::optional<VehicleIndex> find(const std::string& id) const;

  Kinematics state_at(VehicleIndex v, double t) const;
  Kinematics state_at(const std::string& id, double t) const;

  // Whether state_at is defined for t (always true for synthetic t >= 0).
  bool active_at(VehicleIndex v, double t) const;

  // Samples in file order (trace mode only).
  const std::vector<TraceSample>& samples() const { return samples_; }
  const SyntheticParams& synthetic_params() const { return params_; }
  // Random draws consumed while building the model.
  std::uint64_t draws() const { return draws_; }

  // Position without wrap-around at the area edge; equals state_at in trace mode.
  Position unwrapped_position(VehicleIndex v, double t) const;

 private:
  struct Track {
    std::vector<std::size_t> sample_idx;  // trace mode, time-ordered
    double x0 = 0.0;                      // synthetic mode
    double lane_y = 0.0;
    double speed = 0.0;
  };

  VehicleIndex require(const std::string& id) const;

  Mode mode_ = Mode::Synthetic;
  std::vector<std::string> ids_;
  std::vector<Track> tracks_;
  std::vector<TraceSample> samples_;
  SyntheticParams params_;
  std::uint64_t draws_ = 0;
};

// Parses the trace CSV format. ParseError carries the 1-based line number;
// OrderingError flags non-increasing per-vehicle timestamps.
MobilityModel load_trace(std::istream& in);
void write_trace(std::ostream& out, const std::vector<TraceSample>& samples);

// Speed from the displacement over [t - window, t]. Throws PreconditionError
// when t < window.
double sampling_window_speed(const MobilityModel& model, VehicleIndex v, double t,
                             double window = 30.0);

}  // namespace beamsim
