#include "beamsim/mobility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>

#include "beamsim/random.hpp"

namespace beamsim {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line, const char* name) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, value);
  if (field.empty() || res.ec != std::errc{} || res.ptr != last || !std::isfinite(value)) {
    throw ParseError(line, std::string("bad ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

MobilityModel MobilityModel::from_samples(std::vector<TraceSample> samples) {
  if (samples.empty()) throw ParseError(1, "no samples");
  MobilityModel m;
  m.mode_ = Mode::Trace;
  m.samples_ = std::move(samples);

  std::map<std::string, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < m.samples_.size(); ++i) {
    auto& idx = by_id[m.samples_[i].vehicle_id];
    if (!idx.empty() && !(m.samples_[i].time > m.samples_[idx.back()].time)) {
      throw OrderingError("vehicle '" + m.samples_[i].vehicle_id +
                          "': timestamps must strictly increase (sample " + std::to_string(i + 1) +
                          ")");
    }
    idx.push_back(i);
  }
  for (auto& [id, idx] : by_id) m.ids_.push_back(id);
  std::sort(m.ids_.begin(), m.ids_.end(), natural_less);
  for (const auto& id : m.ids_) {
    Track tr;
    tr.sample_idx = std::move(by_id[id]);
    m.tracks_.push_back(std::move(tr));
  }
  return m;
}

MobilityModel MobilityModel::synthetic(const SyntheticParams& params) {
  if (params.vehicle_count == 0) throw PreconditionError("synthetic mobility needs >= 1 vehicle");
  if (params.lane_offsets.empty()) throw PreconditionError("synthetic mobility needs >= 1 lane");
  if (!(params.area_width > 0.0)) throw PreconditionError("area width must be positive");
  for (double y : params.lane_offsets) {
    if (y < 0.0 || y > params.area_height) {
      throw PreconditionError("lane offset outside the simulation area");
    }
  }
  if (params.speed_min > params.speed_max || params.speed_min < 0.0) {
    throw PreconditionError("invalid speed range");
  }

  MobilityModel m;
  m.mode_ = Mode::Synthetic;
  m.params_ = params;
  RandomStream rng(params.seed, "mobility");
  const auto n = params.vehicle_count;
  for (std::size_t i = 0; i < n; ++i) {
    m.ids_.push_back("v" + std::to_string(i + 1));
    Track tr;
    tr.x0 = static_cast<double>(i) * params.area_width / static_cast<double>(n);
    tr.lane_y = params.lane_offsets[i % params.lane_offsets.size()];
    tr.speed = rng.uniform(params.speed_min, params.speed_max);
    m.tracks_.push_back(tr);
  }
  m.draws_ = rng.draws();
  return m;
}

std::optional<VehicleIndex> MobilityModel::find(const std::string& id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id, natural_less);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<VehicleIndex>(it - ids_.begin());
}

VehicleIndex MobilityModel::require(const std::string& id) const {
  const auto v = find(id);
  if (!v) throw UnknownVehicle("unknown vehicle '" + id + "'");
  return *v;
}

bool MobilityModel::active_at(VehicleIndex v, double t) const {
  if (v >= tracks_.size()) return false;
  if (mode_ == Mode::Synthetic) return t >= 0.0;
  const auto& idx = tracks_[v].sample_idx;
  return t >= samples_[idx.front()].time && t <= samples_[idx.back()].time;
}

Position MobilityModel::unwrapped_position(VehicleIndex v, double t) const {
  if (v >= tracks_.size()) throw UnknownVehicle("unknown vehicle index " + std::to_string(v));
  if (mode_ == Mode::Trace) return state_at(v, t).position;
  if (t < 0.0) throw ExtrapolationError("synthetic mobility is undefined before t = 0");
  const auto& tr = tracks_[v];
  return {tr.x0 + tr.speed * t, tr.lane_y};
}

Kinematics MobilityModel::state_at(VehicleIndex v, double t) const {
  if (v >= tracks_.size()) throw UnknownVehicle("unknown vehicle index " + std::to_string(v));
  const auto& tr = tracks_[v];
  if (mode_ == Mode::Synthetic) {
    if (t < 0.0) throw ExtrapolationError("synthetic mobility is undefined before t = 0");
    double x = std::fmod(tr.x0 + tr.speed * t, params_.area_width);
    if (x < 0.0) x += params_.area_width;
    return {{x, tr.lane_y}, tr.speed, 0.0};
  }

  const auto& idx = tr.sample_idx;
  const auto& first = samples_[idx.front()];
  const auto& last = samples_[idx.back()];
  if (t < first.time || t > last.time) {
    throw ExtrapolationError("t=" + format_double(t) + " outside trace range of '" + ids_[v] + "'");
  }
  // first sample with time > t
  const auto it = std::upper_bound(idx.begin(), idx.end(), t, [&](double value, std::size_t i) {
    return value < samples_[i].time;
  });
  if (it == idx.end()) return {last.position, last.speed, last.heading};
  const auto& hi = samples_[*it];
  const auto& lo = samples_[*std::prev(it)];
  const double f = (t - lo.time) / (hi.time - lo.time);
  Position p{lo.position.x + f * (hi.position.x - lo.position.x),
             lo.position.y + f * (hi.position.y - lo.position.y)};
  return {p, lo.speed, lo.heading};
}

Kinematics MobilityModel::state_at(const std::string& id, double t) const {
  return state_at(require(id), t);
}

MobilityModel load_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "no samples");
  if (line != kTraceHeader) throw ParseError(1, "unexpected header '" + line + "'");

  std::vector<TraceSample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != 6) {
      throw ParseError(lineno, "expected 6 fields, got " + std::to_string(fields.size()));
    }
    TraceSample s;
    s.time = parse_number(fields[0], lineno, "time_s");
    s.vehicle_id = std::string(fields[1]);
    s.position.x = parse_number(fields[2], lineno, "x_m");
    s.position.y = parse_number(fields[3], lineno, "y_m");
    s.speed = parse_number(fields[4], lineno, "speed_mps");
    s.heading = parse_number(fields[5], lineno, "heading_deg");
    if (s.vehicle_id.empty()) throw ParseError(lineno, "empty vehicle_id");
    if (s.time < 0.0) throw ParseError(lineno, "negative time");
    if (s.speed < 0.0) throw ParseError(lineno, "negative speed");
    if (s.heading < 0.0 || s.heading >= 360.0) throw ParseError(lineno, "heading outside [0, 360)");
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ParseError(lineno, "no samples");
  return MobilityModel::from_samples(std::move(samples));
}

void write_trace(std::ostream& out, const std::vector<TraceSample>& samples) {
  out << kTraceHeader << '\n';
  for (const auto& s : samples) {
    out << format_double(s.time) << ',' << s.vehicle_id << ',' << format_double(s.position.x) << ','
        << format_double(s.position.y) << ',' << format_double(s.speed) << ','
        << format_double(s.heading) << '\n';
  }
}

double sampling_window_speed(const MobilityModel& model, VehicleIndex v, double t, double window) {
  if (!(window > 0.0)) throw PreconditionError("sampling window must be positive");
  if (t < window) throw PreconditionError("sampling_window_speed: t must be >= window");
  const Position a = model.unwrapped_position(v, t - window);
  const Position b = model.unwrapped_position(v, t);
  return displacement_speed(a, b, t - window, t);
}

}  // namespace beamsim
