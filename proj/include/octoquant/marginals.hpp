#pragma once

// Analytic marginals induced by a uniform direction on S^{d-1}: the single
// rotated coordinate and the norm of a coordinate triplet. Normalizers are
// evaluated in log space; densities stay finite-precision-stable out to the
// domain edges.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "octoquant/rng.hpp"

namespace octoquant {

namespace detail {
inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}
}  // namespace detail

// Density of one coordinate of a uniform unit vector in R^d:
// (1-u^2)^{(d-3)/2} / (B((d-1)/2,(d-1)/2) * 2^{d-2}) on [-1,1].
inline double coord_density(double u, std::uint32_t d) {
  if (d < 4) throw std::invalid_argument("coord_density requires d >= 4");
  if (u < -1.0 || u > 1.0) throw std::invalid_argument("coord_density domain is [-1,1]");
  if (u == -1.0 || u == 1.0) return 0.0;
  const double a = 0.5 * (d - 1.0);
  const double log_norm = detail::log_beta(a, a) + (d - 2.0) * std::log(2.0);
  return std::exp(0.5 * (d - 3.0) * std::log1p(-u * u) - log_norm);
}

// Density of rho = ||(u_1,u_2,u_3)|| for a uniform unit vector in R^d:
// 2 r^2 (1-r^2)^{(d-5)/2} / B(3/2,(d-3)/2) on [0,1]. rho^2 ~ Beta(3/2,(d-3)/2).
inline double triplet_norm_density(double r, std::uint32_t d) {
  if (d < 4) throw std::invalid_argument("triplet_norm_density requires d >= 4");
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("triplet_norm_density domain is [0,1]");
  const double log_norm = detail::log_beta(1.5, 0.5 * (d - 3.0));
  const double e = 0.5 * (d - 5.0);
  const double base = 1.0 - r * r;
  // pow handles the integrable edge cases: 0^0 = 1 at d=5, 0^{-1/2} = inf at d=4.
  return 2.0 * r * r * std::pow(base, e) / std::exp(log_norm);
}

// E[rho^2] = 3/d exactly.
inline double triplet_norm_second_moment(std::uint32_t d) {
  if (d < 4) throw std::invalid_argument("triplet norm moments require d >= 4");
  return 3.0 / static_cast<double>(d);
}

inline double triplet_norm_mean(std::uint32_t d) {
  if (d < 4) throw std::invalid_argument("triplet norm moments require d >= 4");
  const double a = 1.5;
  const double b = 0.5 * (d - 3.0);
  return std::exp(std::lgamma(a + 0.5) + std::lgamma(a + b) - std::lgamma(a) -
                  std::lgamma(a + b + 0.5));
}

inline double triplet_norm_variance(std::uint32_t d) {
  const double m = triplet_norm_mean(d);
  return triplet_norm_second_moment(d) - m * m;
}

// Uniform direction via normalized Gaussian draw.
inline void sample_unit_sphere(std::uint32_t d, Stream& st, double* out) {
  if (d < 2) throw std::invalid_argument("sphere dimension must be >= 2");
  st.fill_gaussian(out, d);
  double s = 0.0;
  for (std::uint32_t i = 0; i < d; ++i) s += out[i] * out[i];
  const double inv = 1.0 / std::sqrt(s);
  for (std::uint32_t i = 0; i < d; ++i) out[i] *= inv;
}

inline std::vector<double> sample_unit_sphere(std::uint32_t d, Stream& st) {
  std::vector<double> v(d);
  sample_unit_sphere(d, st, v.data());
  return v;
}

}  // namespace octoquant
