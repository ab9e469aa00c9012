#include "octoquant/octahedral.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "octoquant/marginals.hpp"
#include "octoquant/quadrature.hpp"
#include "octoquant/rng.hpp"

namespace {

using namespace octoquant;

TEST(OctEncode, PinnedPoints) {
  const double apex[3] = {0.0, 0.0, 1.0};
  auto c = oct_encode(apex);
  EXPECT_DOUBLE_EQ(c[0], 0.0);
  EXPECT_DOUBLE_EQ(c[1], 0.0);

  const double equator[3] = {1.0, 0.0, 0.0};
  c = oct_encode(equator);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 0.0);

  const double south[3] = {0.0, 0.0, -1.0};
  c = oct_encode(south);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 1.0);

  const double s = 1.0 / std::sqrt(3.0);
  const double diag[3] = {s, s, s};
  c = oct_encode(diag);
  EXPECT_NEAR(c[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(c[1], 1.0 / 3.0, 1e-12);
}

TEST(OctEncode, ZeroVectorGetsPlaceholder) {
  const double zero[3] = {0.0, 0.0, 0.0};
  const auto c = oct_encode(zero);
  EXPECT_DOUBLE_EQ(c[0], 0.0);
  EXPECT_DOUBLE_EQ(c[1], 0.0);
}

TEST(OctDecode, PinnedPoints) {
  auto n = oct_decode(0.0, 0.0);
  EXPECT_DOUBLE_EQ(n[0], 0.0);
  EXPECT_DOUBLE_EQ(n[1], 0.0);
  EXPECT_DOUBLE_EQ(n[2], 1.0);

  n = oct_decode(0.5, 0.5);
  EXPECT_NEAR(n[0], 0.70710678, 1e-8);
  EXPECT_NEAR(n[1], 0.70710678, 1e-8);
  EXPECT_NEAR(n[2], 0.0, 1e-12);
}

TEST(OctDecode, CornersHitSouthPoleExactly) {
  for (double xi : {-1.0, 1.0})
    for (double eta : {-1.0, 1.0}) {
      const auto n = oct_decode(xi, eta);
      EXPECT_DOUBLE_EQ(n[0], 0.0);
      EXPECT_DOUBLE_EQ(n[1], 0.0);
      EXPECT_DOUBLE_EQ(n[2], -1.0);
    }
}

TEST(OctDecode, AlwaysUnitNorm) {
  const int grid = 41;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double xi = -1.0 + 2.0 * i / (grid - 1);
      const double eta = -1.0 + 2.0 * j / (grid - 1);
      const auto n = oct_decode(xi, eta);
      EXPECT_NEAR(std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]), 1.0, 1e-12);
    }
}

TEST(OctRoundTrip, UniformSphere) {
  Stream st(17);
  double n[3];
  for (int i = 0; i < 100000; ++i) {
    sample_unit_sphere(3, st, n);
    const auto c = oct_encode(n);
    const auto back = oct_decode(c[0], c[1]);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back[j], n[j], 1e-6);
  }
}

TEST(OctRoundTrip, FoldBoundary) {
  // p_z = 0 means |p_x|+|p_y| = 1, where the two decode branches agree.
  Stream st(19);
  for (int i = 0; i < 1000; ++i) {
    const double px = 2.0 * st.next_unit() - 1.0;
    const double py = (1.0 - std::fabs(px)) * (st.next_u64() & 1 ? 1.0 : -1.0);
    const double l2 = std::sqrt(px * px + py * py);
    const double n[3] = {px / l2, py / l2, 0.0};
    const auto c = oct_encode(n);
    const auto back = oct_decode(c[0], c[1]);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back[j], n[j], 1e-6);
  }
}

TEST(OctEncode, AffineInProjectedPointPerOctant) {
  // Within one octant and one fold branch the map p -> (xi, eta) is affine,
  // so the encode of an L1 midpoint is the midpoint of the encodes.
  Stream st(23);
  const auto check_pair = [](const std::array<double, 2>& c1, const std::array<double, 2>& c2) {
    const auto n1 = oct_decode(c1[0], c1[1]);
    const auto n2 = oct_decode(c2[0], c2[1]);
    double p1[3], p2[3], pm[3];
    const double l1a = std::fabs(n1[0]) + std::fabs(n1[1]) + std::fabs(n1[2]);
    const double l1b = std::fabs(n2[0]) + std::fabs(n2[1]) + std::fabs(n2[2]);
    for (int j = 0; j < 3; ++j) {
      p1[j] = n1[j] / l1a;
      p2[j] = n2[j] / l1b;
      pm[j] = 0.5 * (p1[j] + p2[j]);
    }
    const double l2 = std::sqrt(pm[0] * pm[0] + pm[1] * pm[1] + pm[2] * pm[2]);
    const double nm[3] = {pm[0] / l2, pm[1] / l2, pm[2] / l2};
    const auto cm = oct_encode(nm);
    EXPECT_NEAR(cm[0], 0.5 * (c1[0] + c2[0]), 1e-12);
    EXPECT_NEAR(cm[1], 0.5 * (c1[1] + c2[1]), 1e-12);
  };
  for (int i = 0; i < 100; ++i) {
    // Upper branch, positive quadrant: xi, eta > 0 with xi + eta < 1.
    double a = st.next_unit(), b = st.next_unit();
    if (a + b >= 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    double c = st.next_unit(), d = st.next_unit();
    if (c + d >= 1.0) {
      c = 1.0 - c;
      d = 1.0 - d;
    }
    check_pair({a, b}, {c, d});
    // Lower branch, same corner: xi + eta > 1.
    check_pair({1.0 - a, 1.0 - b}, {1.0 - c, 1.0 - d});
  }
}

TEST(OctDensity, IntegratesToOne) {
  EXPECT_NEAR(integrate([](double x) { return oct_xi_density(x); }, -1.0, 1.0, 2048), 1.0,
              1e-6);
}

TEST(OctDensity, SymmetricInSign) {
  Stream st(29);
  for (int i = 0; i < 100; ++i) {
    const double xi = 2.0 * st.next_unit() - 1.0;
    EXPECT_DOUBLE_EQ(oct_xi_density(xi), oct_xi_density(-xi));
  }
}

TEST(OctDensity, ThrowsOutsideDomain) {
  EXPECT_THROW(oct_xi_density(1.0000001), std::invalid_argument);
  EXPECT_THROW(oct_xi_density(-1.5), std::invalid_argument);
}

TEST(OctDensity, MatchesFoldedSampleHistogram) {
  // 64-bin chi^2 against the analytic marginal; 92.01 is the 99th percentile
  // of chi^2 with 63 degrees of freedom.
  const int bins = 64;
  const std::size_t n = 1000000;
  std::vector<double> counts(bins, 0.0);
  Stream st(31);
  double v[3];
  for (std::size_t i = 0; i < n; ++i) {
    sample_unit_sphere(3, st, v);
    const double xi = oct_encode(v)[0];
    int b = static_cast<int>((xi + 1.0) * 0.5 * bins);
    if (b == bins) b = bins - 1;
    counts[b] += 1.0;
  }
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -1.0 + 2.0 * b / bins;
    const double hi = -1.0 + 2.0 * (b + 1) / bins;
    const double expected =
        static_cast<double>(n) * integrate([](double x) { return oct_xi_density(x); }, lo, hi, 64);
    chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
  }
  EXPECT_LT(chi2, 92.01);
}

}  // namespace
