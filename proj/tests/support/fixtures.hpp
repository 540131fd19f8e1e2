#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "beamsim/scenario.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("beamsim-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Three parked vehicles on one line next to a single RSU. v2 sits in the
// middle and wins the election; v1 and v3 are 240 m apart, within range.
inline std::string parked_trio_trace(double until) {
  std::ostringstream t;
  t << "time_s,vehicle_id,x_m,y_m,speed_mps,heading_deg\n";
  const double xs[] = {100.0, 220.0, 340.0};
  for (double at : {0.0, until}) {
    for (int i = 0; i < 3; ++i) {
      t << at << ",v" << (i + 1) << ',' << xs[i] << ",200,0,0\n";
    }
  }
  return t.str();
}

}  // namespace fixtures
