#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "dynlab/matrix.hpp"

namespace dynlab {

// Deterministic stream of standard normals: Box-Muller over mt19937_64.
// The raw engine stream is pinned by the standard, so the whole normal
// stream is reproducible across platforms for a given seed.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    // 53-bit mantissa double in [0, 1)
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  Vector next_vector(std::size_t n) {
    Vector v(n);
    for (double& x : v) x = next();
    return v;
  }

  std::uint64_t next_raw() { return engine_(); }

  // Integer in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dynlab
