#pragma once

// 1-bit residual sketch: store ||r|| as f16 plus the signs of a second
// rotation of r. The estimator sqrt(pi/(2d)) * ||r|| * (R' q)^T sigma is
// unbiased for q^T r under the isotropic model and adds d+16 bits per key.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "octoquant/io.hpp"
#include "octoquant/rotation.hpp"

namespace octoquant {

struct QjlSidecar {
  std::uint16_t gamma_r = 0;          // f16 bits of the residual norm
  std::vector<std::uint8_t> signs;    // ceil(d/8) bytes, LSB-first, bit=1 => +1
};

// r is the reconstruction residual in the rotated frame, unit-key scale.
inline QjlSidecar qjl_encode(std::uint32_t dim, std::uint64_t qjl_seed,
                             std::span<const double> r) {
  const Rotation rot(dim, qjl_seed);
  std::vector<double> w(dim);
  rot.apply(r.data(), w.data());
  double norm2 = 0.0;
  for (double v : r) norm2 += v * v;
  QjlSidecar sc;
  sc.gamma_r = f32_to_f16(static_cast<float>(std::sqrt(norm2)));
  sc.signs.assign((dim + 7) / 8, 0);
  for (std::uint32_t i = 0; i < dim; ++i)
    if (w[i] >= 0.0) sc.signs[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  return sc;
}

// q_sketch = R' q for the same qjl_seed; returns the estimate of q^T r.
inline double qjl_estimate(std::uint32_t dim, std::span<const double> q_sketch,
                           const QjlSidecar& sc) {
  double acc = 0.0;
  for (std::uint32_t i = 0; i < dim; ++i) {
    const bool pos = (sc.signs[i >> 3] >> (i & 7)) & 1u;
    acc += pos ? q_sketch[i] : -q_sketch[i];
  }
  const double gamma_r = f16_to_f32(sc.gamma_r);
  return std::sqrt(1.5707963267948966 / static_cast<double>(dim)) * gamma_r * acc;
}

}  // namespace octoquant
