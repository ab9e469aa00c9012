#pragma once

// Counter-based pseudo-random streams. A draw is a pure function of
// (seed, counter), so independent streams never share state and a stream
// replayed from the same seed yields the same sequence regardless of what
// other streams did in between.

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace octoquant {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed = 0) : seed_(seed) {}

  // Disjoint child stream; children of distinct indices are independent.
  Stream child(std::uint64_t idx) const {
    return Stream(mix64(seed_ ^ mix64(idx ^ 0x632be59bd9b4e019ull)));
  }

  std::uint64_t seed() const { return seed_; }

  // Value at absolute position i, independent of the cursor.
  std::uint64_t at(std::uint64_t i) const { return mix64(seed_ + i * 0x9e3779b97f4a7c15ull); }

  std::uint64_t next_u64() { return at(ctr_++); }

  // Uniform in (0,1]; never zero so log() is safe.
  double next_unit_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Uniform in [0,1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Box-Muller pair from two uniforms.
  void next_gaussian_pair(double& z0, double& z1) {
    const double u1 = next_unit_pos();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    z0 = r * std::cos(th);
    z1 = r * std::sin(th);
  }

  double next_gaussian() {
    double z0, z1;
    next_gaussian_pair(z0, z1);
    return z0;
  }

  void fill_gaussian(double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) next_gaussian_pair(out[i], out[i + 1]);
    if (i < n) out[i] = next_gaussian();
  }

 private:
  std::uint64_t seed_;
  std::uint64_t ctr_ = 0;
};

}  // namespace octoquant
