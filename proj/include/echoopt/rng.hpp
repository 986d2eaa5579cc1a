#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "echoopt/common.hpp"

namespace echoopt {

// splitmix64 (Steele et al.); used both as a seed mixer and for stream splitting.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for stream `index` of a run seeded with `seed`. The engine gives
// every outer step its own child so checkpointed runs can resume mid-stream.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// mt19937_64 with hand-rolled distributions. The standard pins the engine's
// output sequence but not uniform_int_distribution / normal_distribution, so
// those are implemented here to keep runs bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_unit() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in {0, ..., n-1}, unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    require(n > 0, "next_below: n must be positive");
    std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (polar form avoided to keep the draw
  // count deterministic: exactly two uniforms per pair).
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    // u1 == 0 would take log(0); nudge to the smallest representable draw.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform on the unit sphere in R^n.
  Vec next_unit_vector(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = next_gaussian();
    double norm = v.norm();
    if (norm == 0.0) {
      v.setZero();
      v[0] = 1.0;
      return v;
    }
    return v / norm;
  }

  // Uniform in the closed unit ball in R^n.
  Vec next_in_ball(Eigen::Index n) {
    Vec dir = next_unit_vector(n);
    double radius = std::pow(next_unit(), 1.0 / static_cast<double>(n));
    return radius * dir;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace echoopt
