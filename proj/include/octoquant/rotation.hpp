#pragma once

// Structured random rotation R = H * diag(s): seeded sign flips followed by
// the normalized Walsh-Hadamard transform. H is self-inverse, so
// R^{-1} = diag(s) * H. The 1/sqrt(d) normalization is folded into a single
// final multiply per transform.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "octoquant/rng.hpp"

namespace octoquant {

inline bool is_pow2(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

// In-place normalized WHT butterfly, O(d log d).
inline void fwht(double* x, std::size_t d) {
  for (std::size_t len = 1; len < d; len <<= 1)
    for (std::size_t i = 0; i < d; i += len << 1)
      for (std::size_t j = i; j < i + len; ++j) {
        const double a = x[j];
        const double b = x[j + len];
        x[j] = a + b;
        x[j + len] = a - b;
      }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) x[i] *= scale;
}

class Rotation {
 public:
  Rotation(std::uint32_t dim, std::uint64_t seed) : dim_(dim), signs_(dim) {
    if (!is_pow2(dim)) throw std::invalid_argument("rotation dim must be a power of two");
    const std::uint64_t s = mix64(seed);
    for (std::uint32_t i = 0; i < dim; ++i)
      signs_[i] = (mix64(s ^ i) >> 63) ? -1.0 : 1.0;
  }

  std::uint32_t dim() const { return dim_; }
  const std::vector<double>& signs() const { return signs_; }

  // y = R x
  void apply(const double* x, double* y) const {
    for (std::uint32_t i = 0; i < dim_; ++i) y[i] = x[i] * signs_[i];
    fwht(y, dim_);
  }

  // y = R^{-1} x
  void apply_inverse(const double* x, double* y) const {
    for (std::uint32_t i = 0; i < dim_; ++i) y[i] = x[i];
    fwht(y, dim_);
    for (std::uint32_t i = 0; i < dim_; ++i) y[i] *= signs_[i];
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(dim_);
    apply(x.data(), y.data());
    return y;
  }

  std::vector<double> apply_inverse(const std::vector<double>& x) const {
    std::vector<double> y(dim_);
    apply_inverse(x.data(), y.data());
    return y;
  }

 private:
  std::uint32_t dim_;
  std::vector<double> signs_;
};

}  // namespace octoquant
