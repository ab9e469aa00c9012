#pragma once

// Comparison codecs sharing the rotation preconditioner: per-coordinate
// Lloyd-Max (tq_mse), the same at b-1 bits plus the 1-bit residual sketch
// (tq_qjl), and a recursive polar-angle codec (polar). The residual sketch
// reuses the codec module's implementation unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "octoquant/books.hpp"
#include "octoquant/io.hpp"
#include "octoquant/lloydmax.hpp"
#include "octoquant/qjl.hpp"
#include "octoquant/rotation.hpp"

namespace octoquant {

enum class BaselineKind : std::uint8_t { tq_mse = 0, tq_qjl = 1, polar = 2 };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::tq_mse;
  std::uint32_t dim = 128;
  std::uint8_t bits = 2;
  std::uint64_t rotation_seed = 0;
  std::uint64_t qjl_seed = 1;

  void validate() const {
    if (!is_pow2(dim) || dim < 4)
      throw std::invalid_argument("baseline dim must be a power of two, >= 4");
    if (bits < 1 || bits > 8) throw std::invalid_argument("baseline bits must be in [1,8]");
    if (kind == BaselineKind::tq_qjl && bits < 2)
      throw std::invalid_argument("tq_qjl needs b >= 2: one bit goes to the residual");
  }
};

struct BaselineState {
  float gamma = 0.0f;
  std::vector<std::uint16_t> idx;  // coord indices (d) or polar angles (d-1)
  std::optional<QjlSidecar> sidecar;
};

class TqMse {
 public:
  explicit TqMse(const BaselineConfig& cfg)
      : cfg_(cfg), rot_(cfg.dim, cfg.rotation_seed), book_(&coord_book(cfg.dim, cfg.bits)) {
    cfg.validate();
  }

  // Stage book at an explicit rate; used by the QJL wrapper for b-1.
  TqMse(const BaselineConfig& cfg, int stage_bits)
      : cfg_(cfg), rot_(cfg.dim, cfg.rotation_seed), book_(&coord_book(cfg.dim, stage_bits)) {}

  BaselineState encode(std::span<const double> k) const {
    if (k.size() != cfg_.dim) throw std::invalid_argument("key dimension mismatch");
    double g2 = 0.0;
    for (double v : k) g2 += v * v;
    const double gamma = std::sqrt(g2);
    const double inv = 1.0 / std::max(gamma, 1e-12);
    std::vector<double> u(cfg_.dim);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) u[i] = k[i] * inv;
    std::vector<double> ur(cfg_.dim);
    rot_.apply(u.data(), ur.data());
    BaselineState st;
    st.gamma = static_cast<float>(gamma);
    st.idx.resize(cfg_.dim);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i)
      st.idx[i] = static_cast<std::uint16_t>(book_->quantize(ur[i]));
    return st;
  }

  std::vector<double> reconstruct_rotated(const BaselineState& st) const {
    std::vector<double> ur(cfg_.dim);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) ur[i] = book_->value(st.idx[i]);
    return ur;
  }

  std::vector<double> decode(const BaselineState& st) const {
    std::vector<double> ur = reconstruct_rotated(st);
    std::vector<double> u(cfg_.dim);
    rot_.apply_inverse(ur.data(), u.data());
    const double gamma = st.gamma;
    for (double& v : u) v *= gamma;
    return u;
  }

  std::vector<double> prepare(std::span<const double> q) const {
    std::vector<double> qr(cfg_.dim);
    rot_.apply(q.data(), qr.data());
    return qr;
  }

  double score_prepared(std::span<const double> q_rot, const BaselineState& st) const {
    double acc = 0.0;
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) acc += q_rot[i] * book_->value(st.idx[i]);
    return static_cast<double>(st.gamma) * acc;
  }

  double score(std::span<const double> q, const BaselineState& st) const {
    return score_prepared(prepare(q), st);
  }

  const Codebook& book() const { return *book_; }
  const Rotation& rotation() const { return rot_; }

 private:
  BaselineConfig cfg_;
  Rotation rot_;
  const Codebook* book_;
};

class TqQjl {
 public:
  explicit TqQjl(const BaselineConfig& cfg) : cfg_(cfg), stage_(cfg, cfg.bits - 1) {
    cfg.validate();
    qjl_rot_.emplace(cfg.dim, cfg.qjl_seed);
  }

  BaselineState encode(std::span<const double> k) const {
    BaselineState st = stage_.encode(k);
    double g2 = 0.0;
    for (double v : k) g2 += v * v;
    const double inv = 1.0 / std::max(std::sqrt(g2), 1e-12);
    std::vector<double> u(cfg_.dim);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) u[i] = k[i] * inv;
    std::vector<double> ur(cfg_.dim);
    stage_.rotation().apply(u.data(), ur.data());
    std::vector<double> rec = stage_.reconstruct_rotated(st);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) rec[i] = ur[i] - rec[i];
    st.sidecar = qjl_encode(cfg_.dim, cfg_.qjl_seed, rec);
    return st;
  }

  std::vector<double> decode(const BaselineState& st) const { return stage_.decode(st); }

  struct PreparedQuery {
    std::vector<double> rot;
    std::vector<double> sketch;
  };

  PreparedQuery prepare(std::span<const double> q) const {
    PreparedQuery p;
    p.rot = stage_.prepare(q);
    p.sketch.resize(cfg_.dim);
    qjl_rot_->apply(p.rot.data(), p.sketch.data());
    return p;
  }

  // Stage-1 reconstruction estimate; the benchmark scores with this.
  double score_prepared(const PreparedQuery& p, const BaselineState& st) const {
    return stage_.score_prepared(p.rot, st);
  }

  // Reconstruction plus the residual-sketch estimate.
  double score_with_residual(const PreparedQuery& p, const BaselineState& st) const {
    double est = stage_.score_prepared(p.rot, st);
    if (st.sidecar)
      est += static_cast<double>(st.gamma) * qjl_estimate(cfg_.dim, p.sketch, *st.sidecar);
    return est;
  }

  double score(std::span<const double> q, const BaselineState& st) const {
    return score_prepared(prepare(q), st);
  }

  const TqMse& stage() const { return stage_; }

 private:
  BaselineConfig cfg_;
  TqMse stage_;
  std::optional<Rotation> qjl_rot_;
};

// Recursive polar parameterization: an internal node stores the half-energy
// angle psi = atan2(||right||, ||left||); a size-2 leaf stores the signed
// planar angle. Pre-order emission, d-1 angles total.
class Polar {
 public:
  explicit Polar(const BaselineConfig& cfg) : cfg_(cfg), rot_(cfg.dim, cfg.rotation_seed) {
    cfg.validate();
    for (std::uint32_t half = cfg.dim / 2; half >= 2; half /= 2)
      psi_books_.push_back(&psi_book(half, cfg.bits));
    leaf_ = &leaf_book(cfg.bits);
  }

  BaselineState encode(std::span<const double> k) const {
    if (k.size() != cfg_.dim) throw std::invalid_argument("key dimension mismatch");
    double g2 = 0.0;
    for (double v : k) g2 += v * v;
    const double gamma = std::sqrt(g2);
    const double inv = 1.0 / std::max(gamma, 1e-12);
    std::vector<double> u(cfg_.dim);
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) u[i] = k[i] * inv;
    std::vector<double> ur(cfg_.dim);
    rot_.apply(u.data(), ur.data());
    BaselineState st;
    st.gamma = static_cast<float>(gamma);
    st.idx.reserve(cfg_.dim - 1);
    encode_block(ur.data(), cfg_.dim, 0, st.idx);
    return st;
  }

  std::vector<double> reconstruct_rotated(const BaselineState& st) const {
    std::vector<double> ur(cfg_.dim);
    std::size_t pos = 0;
    decode_block(ur.data(), cfg_.dim, 0, st.idx, pos, 1.0);
    return ur;
  }

  std::vector<double> decode(const BaselineState& st) const {
    std::vector<double> ur = reconstruct_rotated(st);
    std::vector<double> u(cfg_.dim);
    rot_.apply_inverse(ur.data(), u.data());
    const double gamma = st.gamma;
    for (double& v : u) v *= gamma;
    return u;
  }

  std::vector<double> prepare(std::span<const double> q) const {
    std::vector<double> qr(cfg_.dim);
    rot_.apply(q.data(), qr.data());
    return qr;
  }

  double score_prepared(std::span<const double> q_rot, const BaselineState& st) const {
    const std::vector<double> ur = reconstruct_rotated(st);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < cfg_.dim; ++i) acc += q_rot[i] * ur[i];
    return static_cast<double>(st.gamma) * acc;
  }

  double score(std::span<const double> q, const BaselineState& st) const {
    return score_prepared(prepare(q), st);
  }

 private:
  // level: 0 for the full vector, +1 per halving; block size = dim >> level.
  void encode_block(const double* x, std::uint32_t m, std::size_t level,
                    std::vector<std::uint16_t>& out) const {
    if (m == 2) {
      const double theta = std::atan2(x[1], x[0]);  // [-pi, pi]
      out.push_back(static_cast<std::uint16_t>(leaf_->quantize(theta)));
      return;
    }
    const std::uint32_t h = m / 2;
    double le = 0.0, re = 0.0;
    for (std::uint32_t i = 0; i < h; ++i) le += x[i] * x[i];
    for (std::uint32_t i = h; i < m; ++i) re += x[i] * x[i];
    const double psi = std::atan2(std::sqrt(re), std::sqrt(le));  // [0, pi/2]
    out.push_back(static_cast<std::uint16_t>(psi_books_[level]->quantize(psi)));
    encode_block(x, h, level + 1, out);
    encode_block(x + h, h, level + 1, out);
  }

  void decode_block(double* x, std::uint32_t m, std::size_t level,
                    const std::vector<std::uint16_t>& idx, std::size_t& pos,
                    double scale) const {
    if (m == 2) {
      const double theta = leaf_->value(idx[pos++]);
      x[0] = scale * std::cos(theta);
      x[1] = scale * std::sin(theta);
      return;
    }
    const std::uint32_t h = m / 2;
    const double psi = psi_books_[level]->value(idx[pos++]);
    decode_block(x, h, level + 1, idx, pos, scale * std::cos(psi));
    decode_block(x + h, h, level + 1, idx, pos, scale * std::sin(psi));
  }

  BaselineConfig cfg_;
  Rotation rot_;
  std::vector<const Codebook*> psi_books_;  // [level] for half-size dim/2, dim/4, ..., 2
  const Codebook* leaf_;
};

// ---- wire format -----------------------------------------------------------
// "OCTB" v1: kind u8, bits u8, flags u8 (bit0 = residual sidecar), dim u32,
// count u64; per key: gamma f32, index bitstream, optional f16 + sign bytes.

inline std::vector<std::uint8_t> pack_baseline(const BaselineConfig& cfg,
                                               std::span<const BaselineState> states) {
  cfg.validate();
  const bool sidecar = cfg.kind == BaselineKind::tq_qjl;
  const std::uint32_t n_idx = cfg.kind == BaselineKind::polar ? cfg.dim - 1 : cfg.dim;
  const int idx_bits = cfg.kind == BaselineKind::tq_qjl ? cfg.bits - 1 : cfg.bits;
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "OCTB", 4);
  detail::put_le<std::uint8_t>(out, 1);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(cfg.kind));
  detail::put_le<std::uint8_t>(out, cfg.bits);
  detail::put_le<std::uint8_t>(out, sidecar ? 1 : 0);
  detail::put_le<std::uint32_t>(out, cfg.dim);
  detail::put_le<std::uint64_t>(out, states.size());
  for (const BaselineState& st : states) {
    if (st.idx.size() != n_idx) throw std::invalid_argument("state shape does not match config");
    if (sidecar != st.sidecar.has_value())
      throw std::invalid_argument("sidecar presence does not match config");
    detail::put_le<float>(out, st.gamma);
    BitWriter bw;
    for (std::uint32_t i = 0; i < n_idx; ++i) bw.put(st.idx[i], static_cast<unsigned>(idx_bits));
    const auto& bb = bw.finish();
    out.insert(out.end(), bb.begin(), bb.end());
    if (sidecar) {
      detail::put_le<std::uint16_t>(out, st.sidecar->gamma_r);
      detail::put_bytes(out, st.sidecar->signs.data(), st.sidecar->signs.size());
    }
  }
  return out;
}

struct BaselineBlob {
  BaselineConfig cfg;
  std::vector<BaselineState> states;
};

inline BaselineBlob unpack_baseline(const std::uint8_t* p, std::size_t n) {
  detail::ByteReader rd(p, n);
  const std::uint8_t* magic = rd.take(4);
  if (std::memcmp(magic, "OCTB", 4) != 0) throw FormatError("bad baseline magic");
  if (rd.get_le<std::uint8_t>() != 1) throw FormatError("unsupported baseline version");
  const auto kind = rd.get_le<std::uint8_t>();
  if (kind > 2) throw FormatError("unknown baseline kind");
  BaselineBlob blob;
  blob.cfg.kind = static_cast<BaselineKind>(kind);
  blob.cfg.bits = rd.get_le<std::uint8_t>();
  const auto flags = rd.get_le<std::uint8_t>();
  if (flags & ~1u) throw FormatError("unknown flag bits");
  const bool sidecar = flags & 1u;
  if (sidecar != (blob.cfg.kind == BaselineKind::tq_qjl))
    throw FormatError("sidecar flag inconsistent with kind");
  blob.cfg.dim = rd.get_le<std::uint32_t>();
  if (!is_pow2(blob.cfg.dim) || blob.cfg.dim < 4) throw FormatError("baseline dim invalid");
  if (blob.cfg.bits < 1 || blob.cfg.bits > 8 ||
      (blob.cfg.kind == BaselineKind::tq_qjl && blob.cfg.bits < 2))
    throw FormatError("baseline bits out of range");
  const auto count = rd.get_le<std::uint64_t>();
  const std::uint32_t n_idx =
      blob.cfg.kind == BaselineKind::polar ? blob.cfg.dim - 1 : blob.cfg.dim;
  const int idx_bits = blob.cfg.kind == BaselineKind::tq_qjl ? blob.cfg.bits - 1 : blob.cfg.bits;
  const std::size_t idx_bytes = (static_cast<std::size_t>(n_idx) * idx_bits + 7) / 8;
  const std::size_t sc_bytes = sidecar ? 2 + (blob.cfg.dim + 7) / 8 : 0;
  if (rd.remaining() != count * (4 + idx_bytes + sc_bytes))
    throw FormatError("baseline payload size mismatch");
  blob.states.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    BaselineState& st = blob.states[i];
    st.gamma = rd.get_le<float>();
    BitReader br(rd.take(idx_bytes), idx_bytes);
    st.idx.resize(n_idx);
    for (std::uint32_t j = 0; j < n_idx; ++j)
      st.idx[j] = static_cast<std::uint16_t>(br.get(static_cast<unsigned>(idx_bits)));
    if (!br.padding_clear()) throw FormatError("nonzero padding in index stream");
    if (sidecar) {
      QjlSidecar sc;
      sc.gamma_r = rd.get_le<std::uint16_t>();
      const std::size_t nbytes = (blob.cfg.dim + 7) / 8;
      const std::uint8_t* sp = rd.take(nbytes);
      sc.signs.assign(sp, sp + nbytes);
      st.sidecar = std::move(sc);
    }
  }
  return blob;
}

inline BaselineBlob unpack_baseline(const std::vector<std::uint8_t>& bytes) {
  return unpack_baseline(bytes.data(), bytes.size());
}

}  // namespace octoquant
