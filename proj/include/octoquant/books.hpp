#pragma once

// Trained-codebook registry. Books are deterministic functions of
// (kind, dim, bits), so they are trained once per process and shared.
// The direction book is trained from a fixed empirical draw of folded
// sphere coordinates; the density-trained variant is kept as a cross-check.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "octoquant/lloydmax.hpp"
#include "octoquant/marginals.hpp"
#include "octoquant/octahedral.hpp"
#include "octoquant/rng.hpp"

namespace octoquant {

constexpr std::uint64_t kXiSampleSeed = 0xC0DEB00Cull;
constexpr std::uint32_t kXiSamplePoints = 1u << 21;  // two folded coords per point

namespace detail {

struct BookCache {
  std::mutex mu;
  std::map<std::tuple<int, std::uint32_t, int>, std::shared_ptr<const Codebook>> books;
};

inline BookCache& book_cache() {
  static BookCache cache;
  return cache;
}

template <typename Train>
const Codebook& cached_book(int which, std::uint32_t dim, int bits, Train&& train) {
  BookCache& c = book_cache();
  std::lock_guard<std::mutex> lock(c.mu);
  auto key = std::make_tuple(which, dim, bits);
  auto it = c.books.find(key);
  if (it == c.books.end())
    it = c.books.emplace(key, std::make_shared<const Codebook>(train())).first;
  return *it->second;
}

inline const std::vector<double>& xi_training_samples() {
  static const std::vector<double> samples = [] {
    std::vector<double> xs;
    xs.reserve(2 * kXiSamplePoints);
    Stream st(kXiSampleSeed);
    double n[3];
    for (std::uint32_t i = 0; i < kXiSamplePoints; ++i) {
      sample_unit_sphere(3, st, n);
      const auto fe = oct_encode(n);
      xs.push_back(fe[0]);
      xs.push_back(fe[1]);
    }
    return xs;
  }();
  return samples;
}

}  // namespace detail

// Folded-coordinate book on [-1,1]; shared across dims.
inline const Codebook& xi_book(int bits) {
  return detail::cached_book(0, 0, bits, [&] {
    const auto& xs = detail::xi_training_samples();
    return train_from_samples(xs, bits, BookKind::xi, 0, -1.0, 1.0).book;
  });
}

// Same marginal trained from the analytic density; used to validate xi_book.
inline const Codebook& xi_book_density(int bits) {
  return detail::cached_book(1, 0, bits, [&] {
    return train_from_density([](double x) { return oct_xi_density(x); }, -1.0, 1.0, bits,
                              BookKind::xi, 0)
        .book;
  });
}

// Triplet-norm book on [0,1] for dimension d.
inline const Codebook& rho_book(std::uint32_t d, int bits) {
  return detail::cached_book(2, d, bits, [&] {
    // The d=4 density ~ (1-r^2)^{-1/2} is integrable but infinite at r=1;
    // shave the domain so the Simpson CDF grid never samples the pole.
    const double hi = d == 4 ? 1.0 - 0x1p-40 : 1.0;
    return train_from_density([d](double r) { return triplet_norm_density(r, d); }, 0.0, hi,
                              bits, BookKind::rho, d)
        .book;
  });
}

// Single rotated-coordinate book on [-1,1] for dimension d.
inline const Codebook& coord_book(std::uint32_t d, int bits) {
  return detail::cached_book(3, d, bits, [&] {
    return train_from_density([d](double u) { return coord_density(u, d); }, -1.0, 1.0, bits,
                              BookKind::coord, d)
        .book;
  });
}

// Polar split-angle book on [0, pi/2] for halves of size `half`:
// density proportional to sin^{half-1}(2 psi).
inline const Codebook& psi_book(std::uint32_t half, int bits) {
  return detail::cached_book(4, half, bits, [&] {
    const double e = static_cast<double>(half) - 1.0;
    return train_from_density(
               [e](double psi) { return std::pow(std::sin(2.0 * psi), e); }, 0.0,
               1.5707963267948966, bits, BookKind::custom, half)
        .book;
  });
}

// Leaf planar-angle book on [-pi, pi); the marginal is uniform.
inline const Codebook& leaf_book(int bits) {
  return detail::cached_book(5, 0, bits, [&] {
    return train_from_density([](double) { return 1.0; }, -3.141592653589793238462643,
                              3.141592653589793238462643, bits, BookKind::custom, 0)
        .book;
  });
}

}  // namespace octoquant
