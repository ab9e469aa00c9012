#pragma once

// Lloyd-Max scalar quantizer: alternating nearest-centroid partition and
// conditional-mean update, trained either from a 1-D density (deterministic
// quadrature) or from samples (sorted prefix sums). Cells are
// [boundary_{i-1}, boundary_i) with boundaries at adjacent-centroid
// midpoints; a value equal to a boundary quantizes to the upper cell.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "octoquant/io.hpp"
#include "octoquant/quadrature.hpp"

namespace octoquant {

enum class BookKind : std::uint8_t { xi = 0, rho = 1, coord = 2, custom = 3 };

constexpr int kLloydMaxIters = 10000;
constexpr double kLloydRelTol = 1e-10;

struct Codebook {
  BookKind kind = BookKind::custom;
  std::uint8_t bits = 0;
  std::uint32_t dim = 0;  // 0 when the book is dimension-independent
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> centroids;   // ascending
  std::vector<double> boundaries;  // size 2^bits - 1

  std::uint32_t size() const { return static_cast<std::uint32_t>(centroids.size()); }

  void rebuild_boundaries() {
    boundaries.resize(centroids.size() - 1);
    for (std::size_t i = 0; i + 1 < centroids.size(); ++i)
      boundaries[i] = 0.5 * (centroids[i] + centroids[i + 1]);
  }

  // Count of boundaries <= x, so x on a boundary goes to the upper cell.
  std::uint32_t quantize(double x) const {
    return static_cast<std::uint32_t>(
        std::upper_bound(boundaries.begin(), boundaries.end(), x) - boundaries.begin());
  }

  double value(std::uint32_t idx) const {
    if (idx >= centroids.size()) throw std::invalid_argument("codebook index out of range");
    return centroids[idx];
  }
};

struct TrainResult {
  Codebook book;
  double distortion = 0.0;          // mean squared error per unit mass
  int iters = 0;
  std::vector<double> history;      // distortion after each iteration
};

namespace detail {

inline void check_bits(int bits) {
  if (bits < 1 || bits > 12) throw std::invalid_argument("codebook bits must be in [1,12]");
}

// Deterministic empty-cell repair: move the empty cell's centroid into the
// highest-distortion cell, a quarter cell-width above that cell's centroid.
inline void repair_empty(std::vector<double>& centroids, const std::vector<double>& edges,
                         const std::vector<double>& cell_distortion, std::size_t empty_idx) {
  std::size_t donor = 0;
  for (std::size_t i = 1; i < cell_distortion.size(); ++i)
    if (cell_distortion[i] > cell_distortion[donor]) donor = i;
  const double width = edges[donor + 1] - edges[donor];
  centroids[empty_idx] = centroids[donor] + 0.25 * width;
  std::sort(centroids.begin(), centroids.end());
}

}  // namespace detail

inline TrainResult train_from_density(const std::function<double(double)>& f, double lo, double hi,
                                      int bits, BookKind kind = BookKind::custom,
                                      std::uint32_t dim = 0) {
  detail::check_bits(bits);
  if (!(hi > lo)) throw std::invalid_argument("empty training domain");
  const std::size_t K = std::size_t{1} << bits;

  CdfTable cdf(f, lo, hi);
  const MomentTable table(f, lo, hi, kQuadPanels * static_cast<int>(K));
  Codebook book;
  book.kind = kind;
  book.bits = static_cast<std::uint8_t>(bits);
  book.dim = dim;
  book.lo = lo;
  book.hi = hi;
  book.centroids.resize(K);
  for (std::size_t i = 0; i < K; ++i)
    book.centroids[i] = cdf.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(K));

  TrainResult res;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> prev_centroids;
  std::vector<double> edges(K + 1);
  std::vector<double> cell_dist(K);
  for (int it = 0; it < kLloydMaxIters; ++it) {
    book.rebuild_boundaries();
    edges[0] = lo;
    for (std::size_t i = 0; i + 1 < K; ++i) edges[i + 1] = book.boundaries[i];
    edges[K] = hi;

    prev_centroids = book.centroids;
    double total_mass = 0.0;
    double dist = 0.0;
    std::size_t empty = K;  // sentinel
    for (std::size_t i = 0; i < K; ++i) {
      const CellMoments m = table.cell(edges[i], edges[i + 1]);
      total_mass += m.mass;
      if (m.mass > 0.0) {
        book.centroids[i] = m.mean1 / m.mass;
      } else if (empty == K) {
        empty = i;
      }
      const double c = book.centroids[i];
      cell_dist[i] = m.mean2 - 2.0 * c * m.mean1 + c * c * m.mass;
      dist += cell_dist[i];
    }
    if (empty != K) {
      detail::repair_empty(book.centroids, edges, cell_dist, empty);
      prev = std::numeric_limits<double>::infinity();
      continue;
    }
    dist /= total_mass;
    if (dist > prev) {
      // float-noise uptick below the tolerance; keep the better iterate
      book.centroids = prev_centroids;
      break;
    }
    res.history.push_back(dist);
    res.iters = it + 1;
    res.distortion = dist;
    if (prev - dist < kLloydRelTol * prev) break;
    prev = dist;
  }
  book.rebuild_boundaries();
  res.book = std::move(book);
  return res;
}

inline TrainResult train_from_samples(std::span<const double> xs, int bits,
                                      BookKind kind = BookKind::custom, std::uint32_t dim = 0,
                                      double lo = 0.0, double hi = 0.0) {
  detail::check_bits(bits);
  const std::size_t K = std::size_t{1} << bits;
  const std::size_t n = xs.size();
  if (n < K) throw std::invalid_argument("fewer samples than cells");

  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < n; ++i)
    if (s[i] != s[i - 1]) ++distinct;
  if (distinct < K) throw std::invalid_argument("fewer distinct samples than cells");

  // prefix sums: p1[i] = sum of first i values, p2 of squares
  std::vector<double> p1(n + 1, 0.0), p2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i + 1] = p1[i] + s[i];
    p2[i + 1] = p2[i] + s[i] * s[i];
  }

  Codebook book;
  book.kind = kind;
  book.bits = static_cast<std::uint8_t>(bits);
  book.dim = dim;
  book.lo = (lo == 0.0 && hi == 0.0) ? s.front() : lo;
  book.hi = (lo == 0.0 && hi == 0.0) ? s.back() : hi;
  book.centroids.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    std::size_t idx = static_cast<std::size_t>(
        (static_cast<double>(i) + 0.5) / static_cast<double>(K) * static_cast<double>(n));
    if (idx >= n) idx = n - 1;
    book.centroids[i] = s[idx];
  }

  TrainResult res;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> start(K + 1);
  std::vector<double> cell_dist(K);
  std::vector<double> edges(K + 1);
  for (int it = 0; it < kLloydMaxIters; ++it) {
    book.rebuild_boundaries();
    start[0] = 0;
    for (std::size_t i = 0; i + 1 < K; ++i)
      start[i + 1] = static_cast<std::size_t>(
          std::lower_bound(s.begin(), s.end(), book.boundaries[i]) - s.begin());
    start[K] = n;
    edges[0] = s.front();
    for (std::size_t i = 0; i + 1 < K; ++i) edges[i + 1] = book.boundaries[i];
    edges[K] = s.back();

    double dist = 0.0;
    std::size_t empty = K;
    for (std::size_t i = 0; i < K; ++i) {
      const std::size_t a = start[i], b = start[i + 1];
      const double cnt = static_cast<double>(b - a);
      if (b > a) {
        book.centroids[i] = (p1[b] - p1[a]) / cnt;
      } else if (empty == K) {
        empty = i;
      }
      const double c = book.centroids[i];
      cell_dist[i] = (p2[b] - p2[a]) - 2.0 * c * (p1[b] - p1[a]) + c * c * cnt;
      dist += cell_dist[i];
    }
    if (empty != K) {
      detail::repair_empty(book.centroids, edges, cell_dist, empty);
      prev = std::numeric_limits<double>::infinity();
      continue;
    }
    dist /= static_cast<double>(n);
    res.history.push_back(dist);
    res.iters = it + 1;
    if (prev - dist < kLloydRelTol * prev) {
      res.distortion = dist;
      break;
    }
    prev = dist;
    res.distortion = dist;
  }
  book.rebuild_boundaries();
  res.book = std::move(book);
  return res;
}

// Mean squared quantization error of a book against a density (per unit mass).
inline double distortion_under_density(const Codebook& book,
                                       const std::function<double(double)>& f) {
  const std::size_t K = book.centroids.size();
  std::vector<double> edges(K + 1);
  edges[0] = book.lo;
  for (std::size_t i = 0; i + 1 < K; ++i) edges[i + 1] = book.boundaries[i];
  edges[K] = book.hi;
  double dist = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const CellMoments m = integrate_moments(f, edges[i], edges[i + 1]);
    const double c = book.centroids[i];
    dist += m.mean2 - 2.0 * c * m.mean1 + c * c * m.mass;
    mass += m.mass;
  }
  return dist / mass;
}

// "OCBK": magic, version, kind, bits, reserved, dim u32, lo/hi f64, f32 centroids.
inline std::vector<std::uint8_t> serialize(const Codebook& book) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "OCBK", 4);
  detail::put_le<std::uint8_t>(out, 1);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(book.kind));
  detail::put_le<std::uint8_t>(out, book.bits);
  detail::put_le<std::uint8_t>(out, 0);
  detail::put_le<std::uint32_t>(out, book.dim);
  detail::put_le<double>(out, book.lo);
  detail::put_le<double>(out, book.hi);
  for (double c : book.centroids) detail::put_le<float>(out, static_cast<float>(c));
  return out;
}

inline Codebook deserialize_codebook(const std::uint8_t* p, std::size_t n) {
  detail::ByteReader rd(p, n);
  const std::uint8_t* magic = rd.take(4);
  if (std::memcmp(magic, "OCBK", 4) != 0) throw FormatError("bad codebook magic");
  const auto version = rd.get_le<std::uint8_t>();
  if (version != 1) throw FormatError("unsupported codebook version");
  const auto kind = rd.get_le<std::uint8_t>();
  if (kind > 3) throw FormatError("unknown codebook kind");
  const auto bits = rd.get_le<std::uint8_t>();
  if (bits < 1 || bits > 12) throw FormatError("codebook bits out of range");
  const auto reserved = rd.get_le<std::uint8_t>();
  if (reserved != 0) throw FormatError("nonzero reserved byte");
  Codebook book;
  book.kind = static_cast<BookKind>(kind);
  book.bits = bits;
  book.dim = rd.get_le<std::uint32_t>();
  book.lo = rd.get_le<double>();
  book.hi = rd.get_le<double>();
  if (!(book.hi > book.lo)) throw FormatError("bad codebook domain");
  const std::size_t K = std::size_t{1} << bits;
  if (rd.remaining() != K * 4) throw FormatError("codebook payload size mismatch");
  book.centroids.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    book.centroids[i] = rd.get_le<float>();
    if (i > 0 && !(book.centroids[i] >= book.centroids[i - 1]))
      throw FormatError("centroids not ascending");
  }
  book.rebuild_boundaries();
  return book;
}

inline Codebook deserialize_codebook(const std::vector<std::uint8_t>& bytes) {
  return deserialize_codebook(bytes.data(), bytes.size());
}

}  // namespace octoquant
