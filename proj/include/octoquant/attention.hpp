#pragma once

// Online-softmax attention read over a compressed key cache: single pass per
// chunk with a running (max, normalizer, weighted-sum) triple, then an
// associative merge across chunks, so the result is independent of the
// split count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "octoquant/codec.hpp"
#include "octoquant/io.hpp"

namespace octoquant {

struct SoftmaxState {
  double m = -std::numeric_limits<double>::infinity();
  double l = 0.0;
  std::vector<double> acc;

  explicit SoftmaxState(std::size_t width = 0) : acc(width, 0.0) {}

  void push(double s, const double* v, std::size_t width) {
    const double m_new = s > m ? s : m;
    const double scale = std::exp(m - m_new);
    const double w = std::exp(s - m_new);
    l = l * scale + w;
    for (std::size_t j = 0; j < width; ++j) acc[j] = acc[j] * scale + w * v[j];
    m = m_new;
  }

  void merge(const SoftmaxState& o) {
    if (o.l == 0.0) return;
    const double m_new = m > o.m ? m : o.m;
    const double sa = std::exp(m - m_new);
    const double sb = std::exp(o.m - m_new);
    l = l * sa + o.l * sb;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] = acc[j] * sa + o.acc[j] * sb;
    m = m_new;
  }
};

// Softmax-weighted read of `values` (one row per cached key) with logits
// score(q, k_t) / sqrt(d). n_splits chunks are processed independently and
// merged; any split count gives the same output.
inline std::vector<double> attention_decode(const Encoder& enc,
                                            std::span<const double> q,
                                            std::span<const CompressedKey> cache,
                                            const Matrix& values, int n_splits = 1) {
  if (values.rows != cache.size()) throw std::invalid_argument("values/cache length mismatch");
  if (cache.empty()) throw std::invalid_argument("empty cache");
  if (n_splits < 1) throw std::invalid_argument("n_splits must be >= 1");
  const auto prep = enc.prepare(q);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(enc.config().dim));

  const std::size_t n = cache.size();
  const std::size_t chunk = (n + static_cast<std::size_t>(n_splits) - 1) / n_splits;
  SoftmaxState total(values.cols);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = begin + chunk < n ? begin + chunk : n;
    SoftmaxState part(values.cols);
    for (std::size_t t = begin; t < end; ++t)
      part.push(enc.score(prep, cache[t]) * inv_sqrt_d, values.row(t), values.cols);
    total.merge(part);
  }
  std::vector<double> out(values.cols);
  for (std::size_t j = 0; j < values.cols; ++j) out[j] = total.acc[j] / total.l;
  return out;
}

}  // namespace octoquant
