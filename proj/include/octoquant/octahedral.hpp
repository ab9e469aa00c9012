#pragma once

// Octahedral map between S^2 and the square [-1,1]^2. The L1-normalized
// upper hemisphere projects to (p_x, p_y); the lower hemisphere folds into
// the square's corners. sign(0) = +1 throughout, so edge cases are
// deterministic; the whole lower-hemisphere seam still round-trips.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace octoquant {

constexpr double kOctEps = 1e-12;

namespace detail {
inline double sgn_pos(double v) { return v >= 0.0 ? 1.0 : -1.0; }
}  // namespace detail

// n need not be normalized; the map is scale-invariant. Zero maps to (0,0).
inline std::array<double, 2> oct_encode(const double n[3]) {
  const double l1 = std::fabs(n[0]) + std::fabs(n[1]) + std::fabs(n[2]);
  const double inv = 1.0 / (l1 > kOctEps ? l1 : kOctEps);
  const double px = n[0] * inv;
  const double py = n[1] * inv;
  const double pz = n[2] * inv;
  if (pz >= 0.0) return {px, py};
  return {detail::sgn_pos(px) * (1.0 - std::fabs(py)),
          detail::sgn_pos(py) * (1.0 - std::fabs(px))};
}

// Unit vector on S^2; corners (+-1,+-1) all decode to (0,0,-1).
inline std::array<double, 3> oct_decode(double xi, double eta) {
  xi = std::clamp(xi, -1.0, 1.0);
  eta = std::clamp(eta, -1.0, 1.0);
  double x = xi;
  double y = eta;
  double z = 1.0 - std::fabs(xi) - std::fabs(eta);
  if (z < 0.0) {
    x = detail::sgn_pos(xi) * (1.0 - std::fabs(eta));
    y = detail::sgn_pos(eta) * (1.0 - std::fabs(xi));
  }
  const double norm = std::sqrt(x * x + y * y + z * z);
  const double inv = 1.0 / (norm > kOctEps ? norm : kOctEps);
  return {x * inv, y * inv, z * inv};
}

// Marginal density of either folded coordinate under a uniform direction on
// S^2. Integrates to 1 over [-1,1]; symmetric in |xi|.
inline double oct_xi_density(double xi) {
  const double a = std::fabs(xi);
  if (a > 1.0) throw std::invalid_argument("oct_xi_density domain is [-1,1]");
  const double pi = 3.141592653589793238462643383279;
  const double root = std::sqrt(a * a + (1.0 - a) * (1.0 - a));
  const double upper = (1.0 - a) / (1.0 - 2.0 * a + 3.0 * a * a);
  const double lower = a / (2.0 - 4.0 * a + 3.0 * a * a);
  return (upper + lower) / (pi * root);
}

}  // namespace octoquant
