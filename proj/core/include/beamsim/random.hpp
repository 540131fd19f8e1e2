#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace beamsim {

// One named substream of a run's randomness. Draws are produced from raw
// 64-bit engine output so values are identical across standard libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name);

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace beamsim
