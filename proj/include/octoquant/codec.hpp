#pragma once

// Rotation-preconditioned triplet codec. A key splits into gamma = ||k|| and
// a rotated unit direction; each contiguous coordinate triplet stores two
// folded octahedral coordinates plus a norm index. Joint rounding modes
// search candidate direction cells around the nearest-centroid seed and pick
// the one maximizing s = t . nhat, which minimizes the true triplet error;
// the norm index then rounds clip(s*) to the nearest norm centroid. Scalar
// mode rounds all three scalars independently (norm index from ||t||).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "octoquant/books.hpp"
#include "octoquant/io.hpp"
#include "octoquant/lloydmax.hpp"
#include "octoquant/octahedral.hpp"
#include "octoquant/qjl.hpp"
#include "octoquant/rotation.hpp"

namespace octoquant {

enum class Rounding : std::uint8_t { scalar = 0, local2x2 = 1, local3x3 = 2, full = 3 };

inline const char* rounding_name(Rounding r) {
  switch (r) {
    case Rounding::scalar: return "scalar";
    case Rounding::local2x2: return "local2x2";
    case Rounding::local3x3: return "local3x3";
    case Rounding::full: return "full";
  }
  return "?";
}

inline Rounding parse_rounding(const std::string& s) {
  if (s == "scalar") return Rounding::scalar;
  if (s == "local2x2") return Rounding::local2x2;
  if (s == "local3x3") return Rounding::local3x3;
  if (s == "full") return Rounding::full;
  throw std::invalid_argument("unknown rounding mode: " + s);
}

struct CodecConfig {
  std::uint32_t dim = 128;
  std::uint8_t b_dir = 3;
  std::uint8_t b_nrm = 1;
  Rounding rounding = Rounding::local3x3;
  std::uint64_t rotation_seed = 0;
  bool qjl = false;
  std::uint64_t qjl_seed = 1;

  std::uint32_t n_tri() const { return (dim + 2) / 3; }

  void validate() const {
    if (!is_pow2(dim) || dim < 4)
      throw std::invalid_argument("codec dim must be a power of two, >= 4");
    if (b_dir < 1 || b_dir > 8 || b_nrm < 1 || b_nrm > 8)
      throw std::invalid_argument("codec bits must be in [1,8]");
    if (qjl && qjl_seed == rotation_seed)
      throw std::invalid_argument("qjl_seed must differ from rotation_seed");
  }
};

// Around a nominal rate b: one extra bit per direction coordinate, one fewer
// on the norm.
inline std::pair<int, int> default_bit_split(int b) {
  if (b < 2) throw std::invalid_argument("default bit split needs b >= 2");
  return {b + 1, b - 1};
}

struct CompressedKey {
  float gamma = 0.0f;
  std::vector<std::uint16_t> dir;  // 2 per triplet: xi, eta interleaved
  std::vector<std::uint16_t> nrm;  // 1 per triplet
  std::optional<QjlSidecar> qjl;
};

struct TripletCode {
  std::uint32_t ixi = 0;
  std::uint32_t ieta = 0;
  std::uint32_t irho = 0;
  double s = 0.0;  // t . nhat at the chosen direction
};

using DirTable = std::vector<std::array<double, 3>>;  // [ixi * K + ieta]

namespace detail {

inline std::shared_ptr<const DirTable> build_dir_table(const Codebook& xi) {
  const std::size_t K = xi.centroids.size();
  auto table = std::make_shared<DirTable>(K * K);
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b)
      (*table)[a * K + b] = oct_decode(xi.centroids[a], xi.centroids[b]);
  return table;
}

// Registry xi books have stable addresses, so the table cache keys on them.
inline std::shared_ptr<const DirTable> cached_dir_table(const Codebook& xi) {
  static std::mutex mu;
  static std::map<const Codebook*, std::shared_ptr<const DirTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(&xi);
  if (it == cache.end()) it = cache.emplace(&xi, build_dir_table(xi)).first;
  return it->second;
}

}  // namespace detail

struct Books {
  const Codebook* xi = nullptr;
  const Codebook* rho = nullptr;
  std::shared_ptr<const DirTable> dirs;

  static Books standard(const CodecConfig& cfg) {
    Books b;
    b.xi = &xi_book(cfg.b_dir);
    b.rho = &rho_book(cfg.dim, cfg.b_nrm);
    b.dirs = detail::cached_dir_table(*b.xi);
    return b;
  }

  static Books custom(const Codebook& xi, const Codebook& rho) {
    Books b;
    b.xi = &xi;
    b.rho = &rho;
    b.dirs = detail::build_dir_table(xi);
    return b;
  }
};

inline TripletCode joint_round_triplet(const double t[3], const Books& books, Rounding mode) {
  const Codebook& xi = *books.xi;
  const Codebook& rho = *books.rho;
  const DirTable& dirs = *books.dirs;
  const std::uint32_t K = xi.size();

  const auto fe = oct_encode(t);
  const std::uint32_t sx = xi.quantize(fe[0]);
  const std::uint32_t sy = xi.quantize(fe[1]);

  TripletCode code;
  if (mode == Rounding::scalar) {
    const double r = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    code.ixi = sx;
    code.ieta = sy;
    code.irho = rho.quantize(std::clamp(r, 0.0, 1.0));
    const auto& n = dirs[sx * K + sy];
    code.s = t[0] * n[0] + t[1] * n[1] + t[2] * n[2];
    return code;
  }

  std::uint32_t ax0 = sx, ax1 = sx, ay0 = sy, ay1 = sy;
  if (mode == Rounding::local2x2) {
    ax1 = std::min(sx + 1, K - 1);
    ay1 = std::min(sy + 1, K - 1);
  } else if (mode == Rounding::local3x3) {
    ax0 = sx > 0 ? sx - 1 : 0;
    ay0 = sy > 0 ? sy - 1 : 0;
    ax1 = std::min(sx + 1, K - 1);
    ay1 = std::min(sy + 1, K - 1);
  } else {  // full
    ax0 = ay0 = 0;
    ax1 = ay1 = K - 1;
  }

  double best = -std::numeric_limits<double>::infinity();
  std::uint32_t bx = ax0, by = ay0;
  for (std::uint32_t a = ax0; a <= ax1; ++a)
    for (std::uint32_t b = ay0; b <= ay1; ++b) {
      const auto& n = dirs[a * K + b];
      const double s = t[0] * n[0] + t[1] * n[1] + t[2] * n[2];
      if (s > best) {  // ties keep the lowest row-major pair
        best = s;
        bx = a;
        by = b;
      }
    }
  code.ixi = bx;
  code.ieta = by;
  code.irho = rho.quantize(std::clamp(best, 0.0, 1.0));
  code.s = best;
  return code;
}

class Encoder {
 public:
  explicit Encoder(const CodecConfig& cfg)
      : cfg_(cfg), books_(Books::standard(cfg)), rot_(cfg.dim, cfg.rotation_seed) {
    cfg.validate();
    if (cfg_.qjl) qjl_rot_.emplace(cfg_.dim, cfg_.qjl_seed);
  }

  Encoder(const CodecConfig& cfg, const Books& books)
      : cfg_(cfg), books_(books), rot_(cfg.dim, cfg.rotation_seed) {
    cfg.validate();
    if (cfg_.qjl) qjl_rot_.emplace(cfg_.dim, cfg_.qjl_seed);
  }

  const CodecConfig& config() const { return cfg_; }
  const Books& books() const { return books_; }

  CompressedKey encode(std::span<const double> k) const {
    if (k.size() != cfg_.dim) throw std::invalid_argument("key dimension mismatch");
    const std::uint32_t d = cfg_.dim;
    const std::uint32_t nt = cfg_.n_tri();

    double g2 = 0.0;
    for (double v : k) g2 += v * v;
    const double gamma = std::sqrt(g2);
    const double inv = 1.0 / std::max(gamma, 1e-12);

    std::vector<double> u(d);
    for (std::uint32_t i = 0; i < d; ++i) u[i] = k[i] * inv;
    std::vector<double> ur(d);
    rot_.apply(u.data(), ur.data());

    std::vector<double> padded(3 * nt, 0.0);
    std::copy(ur.begin(), ur.end(), padded.begin());

    CompressedKey ck;
    ck.gamma = static_cast<float>(gamma);
    ck.dir.resize(2 * nt);
    ck.nrm.resize(nt);
    for (std::uint32_t t = 0; t < nt; ++t) {
      const TripletCode c = joint_round_triplet(&padded[3 * t], books_, cfg_.rounding);
      ck.dir[2 * t] = static_cast<std::uint16_t>(c.ixi);
      ck.dir[2 * t + 1] = static_cast<std::uint16_t>(c.ieta);
      ck.nrm[t] = static_cast<std::uint16_t>(c.irho);
    }

    if (cfg_.qjl) {
      std::vector<double> uhat = reconstruct_rotated(ck);
      for (std::uint32_t i = 0; i < d; ++i) uhat[i] = ur[i] - uhat[i];
      ck.qjl = qjl_encode(d, cfg_.qjl_seed, uhat);
    }
    return ck;
  }

  // Unit-scale reconstruction in the rotated frame, truncated to dim.
  std::vector<double> reconstruct_rotated(const CompressedKey& ck) const {
    check_codes(ck);
    const std::uint32_t d = cfg_.dim;
    const std::uint32_t nt = cfg_.n_tri();
    const DirTable& dirs = *books_.dirs;
    const std::uint32_t K = books_.xi->size();
    std::vector<double> out(d, 0.0);
    for (std::uint32_t t = 0; t < nt; ++t) {
      const auto& n = dirs[ck.dir[2 * t] * K + ck.dir[2 * t + 1]];
      const double r = books_.rho->value(ck.nrm[t]);
      const std::uint32_t base = 3 * t;
      for (std::uint32_t j = 0; j < 3 && base + j < d; ++j) out[base + j] = r * n[j];
    }
    return out;
  }

  std::vector<double> decode(const CompressedKey& ck) const {
    std::vector<double> ur = reconstruct_rotated(ck);
    std::vector<double> u(cfg_.dim);
    rot_.apply_inverse(ur.data(), u.data());
    const double gamma = ck.gamma;
    for (double& v : u) v *= gamma;
    return u;
  }

  struct PreparedQuery {
    std::vector<double> rot;     // R q
    std::vector<double> sketch;  // R' R q when QJL is enabled
  };

  PreparedQuery prepare(std::span<const double> q) const {
    if (q.size() != cfg_.dim) throw std::invalid_argument("query dimension mismatch");
    PreparedQuery p;
    p.rot.resize(cfg_.dim);
    rot_.apply(q.data(), p.rot.data());
    if (cfg_.qjl) {
      p.sketch.resize(cfg_.dim);
      qjl_rot_->apply(p.rot.data(), p.sketch.data());
    }
    return p;
  }

  // Factorized estimate of q^T k; no key-side reconstruction materialized.
  double score(const PreparedQuery& p, const CompressedKey& ck) const {
    check_codes(ck);
    const std::uint32_t d = cfg_.dim;
    const std::uint32_t nt = cfg_.n_tri();
    const DirTable& dirs = *books_.dirs;
    const std::uint32_t K = books_.xi->size();
    double acc = 0.0;
    for (std::uint32_t t = 0; t < nt; ++t) {
      const auto& n = dirs[ck.dir[2 * t] * K + ck.dir[2 * t + 1]];
      const std::uint32_t base = 3 * t;
      double dot = 0.0;
      for (std::uint32_t j = 0; j < 3 && base + j < d; ++j) dot += p.rot[base + j] * n[j];
      acc += books_.rho->value(ck.nrm[t]) * dot;
    }
    double est = acc;
    if (cfg_.qjl && ck.qjl) est += qjl_estimate(d, p.sketch, *ck.qjl);
    return static_cast<double>(ck.gamma) * est;
  }

  double score(std::span<const double> q, const CompressedKey& ck) const {
    return score(prepare(q), ck);
  }

 private:
  void check_codes(const CompressedKey& ck) const {
    const std::uint32_t nt = cfg_.n_tri();
    if (ck.dir.size() != 2 * nt || ck.nrm.size() != nt)
      throw FormatError("code stream length mismatch");
    const std::uint32_t kd = books_.xi->size();
    const std::uint32_t kn = books_.rho->size();
    for (std::uint32_t t = 0; t < nt; ++t) {
      if (ck.dir[2 * t] >= kd || ck.dir[2 * t + 1] >= kd)
        throw FormatError("direction index out of range");
      if (ck.nrm[t] >= kn) throw FormatError("norm index out of range");
    }
  }

  CodecConfig cfg_;
  Books books_;
  Rotation rot_;
  std::optional<Rotation> qjl_rot_;
};

inline CompressedKey encode_key(const CodecConfig& cfg, std::span<const double> k) {
  return Encoder(cfg).encode(k);
}

inline std::vector<double> decode_key(const CodecConfig& cfg, const CompressedKey& ck) {
  return Encoder(cfg).decode(ck);
}

inline double score(const CodecConfig& cfg, std::span<const double> q, const CompressedKey& ck) {
  return Encoder(cfg).score(q, ck);
}

// Raw storage rate per input coordinate, fp32 gamma included.
inline double effective_bits_per_coord(const CodecConfig& cfg) {
  const double nt = cfg.n_tri();
  double bits = 2.0 * nt * cfg.b_dir + nt * cfg.b_nrm + 32.0;
  if (cfg.qjl) bits += cfg.dim + 16.0;
  return bits / cfg.dim;
}

// ---- wire format -----------------------------------------------------------
// "OCTO" v1: flags u8 (bit0 = QJL), b_dir u8, b_nrm u8, dim u32, count u64;
// per key: gamma f32, dir bits (2*n_tri fields), nrm bits (n_tri fields),
// then f16 residual norm + ceil(d/8) sign bytes when QJL is on. All bit
// streams are LSB-first and zero-padded to a byte.

inline std::vector<std::uint8_t> pack_keys(const CodecConfig& cfg,
                                           std::span<const CompressedKey> keys) {
  cfg.validate();
  const std::uint32_t nt = cfg.n_tri();
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "OCTO", 4);
  detail::put_le<std::uint8_t>(out, 1);
  detail::put_le<std::uint8_t>(out, cfg.qjl ? 1 : 0);
  detail::put_le<std::uint8_t>(out, cfg.b_dir);
  detail::put_le<std::uint8_t>(out, cfg.b_nrm);
  detail::put_le<std::uint32_t>(out, cfg.dim);
  detail::put_le<std::uint64_t>(out, keys.size());
  for (const CompressedKey& ck : keys) {
    if (ck.dir.size() != 2 * nt || ck.nrm.size() != nt)
      throw std::invalid_argument("key shape does not match config");
    if (cfg.qjl != ck.qjl.has_value())
      throw std::invalid_argument("QJL sidecar presence does not match config");
    detail::put_le<float>(out, ck.gamma);
    BitWriter dw;
    for (std::uint32_t i = 0; i < 2 * nt; ++i) dw.put(ck.dir[i], cfg.b_dir);
    const auto& db = dw.finish();
    out.insert(out.end(), db.begin(), db.end());
    BitWriter nw;
    for (std::uint32_t i = 0; i < nt; ++i) nw.put(ck.nrm[i], cfg.b_nrm);
    const auto& nb = nw.finish();
    out.insert(out.end(), nb.begin(), nb.end());
    if (cfg.qjl) {
      detail::put_le<std::uint16_t>(out, ck.qjl->gamma_r);
      detail::put_bytes(out, ck.qjl->signs.data(), ck.qjl->signs.size());
    }
  }
  return out;
}

inline std::vector<std::uint8_t> pack(const CodecConfig& cfg, const CompressedKey& ck) {
  return pack_keys(cfg, std::span<const CompressedKey>(&ck, 1));
}

struct PackedBlob {
  std::uint32_t dim = 0;
  std::uint8_t b_dir = 0;
  std::uint8_t b_nrm = 0;
  bool qjl = false;
  std::vector<CompressedKey> keys;
};

inline PackedBlob unpack_keys(const std::uint8_t* p, std::size_t n) {
  detail::ByteReader rd(p, n);
  const std::uint8_t* magic = rd.take(4);
  if (std::memcmp(magic, "OCTO", 4) != 0) throw FormatError("bad blob magic");
  if (rd.get_le<std::uint8_t>() != 1) throw FormatError("unsupported blob version");
  const auto flags = rd.get_le<std::uint8_t>();
  if (flags & ~1u) throw FormatError("unknown flag bits");
  PackedBlob blob;
  blob.qjl = flags & 1u;
  blob.b_dir = rd.get_le<std::uint8_t>();
  blob.b_nrm = rd.get_le<std::uint8_t>();
  if (blob.b_dir < 1 || blob.b_dir > 8 || blob.b_nrm < 1 || blob.b_nrm > 8)
    throw FormatError("blob bits out of range");
  blob.dim = rd.get_le<std::uint32_t>();
  if (!is_pow2(blob.dim) || blob.dim < 4) throw FormatError("blob dim invalid");
  const auto count = rd.get_le<std::uint64_t>();
  const std::uint32_t nt = (blob.dim + 2) / 3;
  const std::size_t dir_bytes = (2 * static_cast<std::size_t>(nt) * blob.b_dir + 7) / 8;
  const std::size_t nrm_bytes = (static_cast<std::size_t>(nt) * blob.b_nrm + 7) / 8;
  const std::size_t qjl_bytes = blob.qjl ? 2 + (blob.dim + 7) / 8 : 0;
  const std::size_t per_key = 4 + dir_bytes + nrm_bytes + qjl_bytes;
  if (rd.remaining() != count * per_key) throw FormatError("blob payload size mismatch");

  blob.keys.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CompressedKey& ck = blob.keys[i];
    ck.gamma = rd.get_le<float>();
    {
      BitReader br(rd.take(dir_bytes), dir_bytes);
      ck.dir.resize(2 * nt);
      for (std::uint32_t j = 0; j < 2 * nt; ++j)
        ck.dir[j] = static_cast<std::uint16_t>(br.get(blob.b_dir));
      if (!br.padding_clear()) throw FormatError("nonzero padding in direction stream");
    }
    {
      BitReader br(rd.take(nrm_bytes), nrm_bytes);
      ck.nrm.resize(nt);
      for (std::uint32_t j = 0; j < nt; ++j)
        ck.nrm[j] = static_cast<std::uint16_t>(br.get(blob.b_nrm));
      if (!br.padding_clear()) throw FormatError("nonzero padding in norm stream");
    }
    if (blob.qjl) {
      QjlSidecar sc;
      sc.gamma_r = rd.get_le<std::uint16_t>();
      const std::size_t nbytes = (blob.dim + 7) / 8;
      const std::uint8_t* sp = rd.take(nbytes);
      sc.signs.assign(sp, sp + nbytes);
      if (blob.dim % 8 != 0) {
        const std::uint8_t mask = static_cast<std::uint8_t>(0xffu << (blob.dim % 8));
        if (sc.signs.back() & mask) throw FormatError("nonzero padding in sign stream");
      }
      ck.qjl = std::move(sc);
    }
  }
  return blob;
}

inline PackedBlob unpack_keys(const std::vector<std::uint8_t>& bytes) {
  return unpack_keys(bytes.data(), bytes.size());
}

inline CompressedKey unpack(const CodecConfig& cfg, const std::vector<std::uint8_t>& bytes) {
  PackedBlob blob = unpack_keys(bytes);
  if (blob.dim != cfg.dim || blob.b_dir != cfg.b_dir || blob.b_nrm != cfg.b_nrm ||
      blob.qjl != cfg.qjl)
    throw std::invalid_argument("blob header does not match config");
  if (blob.keys.size() != 1) throw std::invalid_argument("expected a single-key blob");
  return std::move(blob.keys[0]);
}

}  // namespace octoquant
