#pragma once

// Synthetic rate-quality harness: reconstruction metrics over shared seeded
// draws, the needle-retrieval probe, the bit-split sweep, and the
// rounding-mode ablation. Within one seed every codec consumes byte-identical
// key/query draws; per-seed results land in preassigned slots so serial and
// seed-parallel runs aggregate identically (pairwise summation).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "octoquant/attention.hpp"
#include "octoquant/baselines.hpp"
#include "octoquant/codec.hpp"
#include "octoquant/io.hpp"
#include "octoquant/rng.hpp"

namespace octoquant {

constexpr std::uint64_t kBenchMasterSeed = 0x0C70C0DE5EEDull;

inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  const std::size_t n = xs.size();
  if (n == 0) return r;
  r.mean = pairwise_sum(xs) / static_cast<double>(n);
  if (n < 2) return r;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - r.mean) * (xs[i] - r.mean);
  r.se = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n));
  return r;
}

enum class CodecId { fp32, octo, octo_qjl, tq_mse, tq_qjl, polar };

inline const char* codec_id_name(CodecId id) {
  switch (id) {
    case CodecId::fp32: return "fp32";
    case CodecId::octo: return "octo";
    case CodecId::octo_qjl: return "octo_qjl";
    case CodecId::tq_mse: return "tq_mse";
    case CodecId::tq_qjl: return "tq_qjl";
    case CodecId::polar: return "polar";
  }
  return "?";
}

inline CodecId parse_codec_id(const std::string& s) {
  if (s == "fp32") return CodecId::fp32;
  if (s == "octo") return CodecId::octo;
  if (s == "octo_qjl") return CodecId::octo_qjl;
  if (s == "tq_mse") return CodecId::tq_mse;
  if (s == "tq_qjl") return CodecId::tq_qjl;
  if (s == "polar") return CodecId::polar;
  throw std::invalid_argument("unknown codec id: " + s);
}

struct MetricRow {
  std::string codec;
  int bits = 0;
  int b_dir = 0;          // 0 when not applicable
  int b_nrm = 0;
  std::string rounding;   // empty when not applicable
  int seeds = 0;
  double cosine = 0.0, cosine_se = 0.0;
  double mse = 0.0, mse_se = 0.0;
  double ip = 0.0, ip_se = 0.0;
  bool has_mass = false;
  double mass = 0.0, mass_se = 0.0;
};

namespace detail {

inline Matrix gaussian_matrix(Stream st, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  st.fill_gaussian(m.data.data(), m.data.size());
  return m;
}

}  // namespace detail

// One codec at one rate, bound to one seed's rotation/sketch seeds.
class BoundCodec {
 public:
  BoundCodec(CodecId id, int bits, std::uint32_t dim, Rounding rounding,
             std::uint64_t rot_seed, std::uint64_t qjl_seed)
      : id_(id), bits_(bits) {
    switch (id) {
      case CodecId::fp32:
        bits_ = 32;
        break;
      case CodecId::octo:
      case CodecId::octo_qjl: {
        const auto [bd, bn] = default_bit_split(bits);
        CodecConfig cfg;
        cfg.dim = dim;
        cfg.b_dir = static_cast<std::uint8_t>(bd);
        cfg.b_nrm = static_cast<std::uint8_t>(bn);
        cfg.rounding = rounding;
        cfg.rotation_seed = rot_seed;
        cfg.qjl = (id == CodecId::octo_qjl);
        cfg.qjl_seed = qjl_seed;
        enc_.emplace(cfg);
        break;
      }
      case CodecId::tq_mse: {
        BaselineConfig cfg{BaselineKind::tq_mse, dim, static_cast<std::uint8_t>(bits),
                           rot_seed, qjl_seed};
        tq_.emplace(cfg);
        break;
      }
      case CodecId::tq_qjl: {
        BaselineConfig cfg{BaselineKind::tq_qjl, dim, static_cast<std::uint8_t>(bits),
                           rot_seed, qjl_seed};
        tqq_.emplace(cfg);
        break;
      }
      case CodecId::polar: {
        BaselineConfig cfg{BaselineKind::polar, dim, static_cast<std::uint8_t>(bits),
                           rot_seed, qjl_seed};
        polar_.emplace(cfg);
        break;
      }
    }
  }

  CodecId id() const { return id_; }
  int bits() const { return bits_; }
  int b_dir() const { return enc_ ? enc_->config().b_dir : 0; }
  int b_nrm() const { return enc_ ? enc_->config().b_nrm : 0; }
  std::string rounding() const {
    return enc_ ? rounding_name(enc_->config().rounding) : std::string();
  }

  void encode_keys(const Matrix& keys) {
    n_keys_ = keys.rows;
    switch (id_) {
      case CodecId::fp32:
        raw_ = &keys;
        break;
      case CodecId::octo:
      case CodecId::octo_qjl:
        cks_.clear();
        cks_.reserve(keys.rows);
        for (std::size_t i = 0; i < keys.rows; ++i)
          cks_.push_back(enc_->encode(std::span(keys.row(i), keys.cols)));
        break;
      case CodecId::tq_mse:
        states_.clear();
        states_.reserve(keys.rows);
        for (std::size_t i = 0; i < keys.rows; ++i)
          states_.push_back(tq_->encode(std::span(keys.row(i), keys.cols)));
        break;
      case CodecId::tq_qjl:
        states_.clear();
        states_.reserve(keys.rows);
        for (std::size_t i = 0; i < keys.rows; ++i)
          states_.push_back(tqq_->encode(std::span(keys.row(i), keys.cols)));
        break;
      case CodecId::polar:
        states_.clear();
        states_.reserve(keys.rows);
        for (std::size_t i = 0; i < keys.rows; ++i)
          states_.push_back(polar_->encode(std::span(keys.row(i), keys.cols)));
        break;
    }
  }

  std::vector<double> reconstruct(std::size_t i) const {
    switch (id_) {
      case CodecId::fp32:
        return std::vector<double>(raw_->row(i), raw_->row(i) + raw_->cols);
      case CodecId::octo:
      case CodecId::octo_qjl:
        return enc_->decode(cks_[i]);
      case CodecId::tq_mse:
        return tq_->decode(states_[i]);
      case CodecId::tq_qjl:
        return tqq_->decode(states_[i]);
      case CodecId::polar:
        return polar_->decode(states_[i]);
    }
    return {};
  }

  void prepare_queries(const Matrix& queries) {
    queries_ = &queries;
    preps_.clear();
    q_rots_.clear();
    tqq_preps_.clear();
    for (std::size_t i = 0; i < queries.rows; ++i) {
      const std::span<const double> q(queries.row(i), queries.cols);
      switch (id_) {
        case CodecId::fp32:
          break;
        case CodecId::octo:
        case CodecId::octo_qjl:
          preps_.push_back(enc_->prepare(q));
          break;
        case CodecId::tq_mse:
          q_rots_.push_back(tq_->prepare(q));
          break;
        case CodecId::tq_qjl:
          tqq_preps_.push_back(tqq_->prepare(q));
          break;
        case CodecId::polar:
          q_rots_.push_back(polar_->prepare(q));
          break;
      }
    }
  }

  double score(std::size_t qi, std::size_t ki) const {
    switch (id_) {
      case CodecId::fp32: {
        const double* q = queries_->row(qi);
        const double* k = raw_->row(ki);
        double acc = 0.0;
        for (std::size_t j = 0; j < raw_->cols; ++j) acc += q[j] * k[j];
        return acc;
      }
      case CodecId::octo:
      case CodecId::octo_qjl:
        return enc_->score(preps_[qi], cks_[ki]);
      case CodecId::tq_mse:
        return tq_->score_prepared(q_rots_[qi], states_[ki]);
      case CodecId::tq_qjl:
        // the benchmark scores tq_qjl through its stage-1 reconstruction
        return tqq_->score_prepared(tqq_preps_[qi], states_[ki]);
      case CodecId::polar:
        return polar_->score_prepared(q_rots_[qi], states_[ki]);
    }
    return 0.0;
  }

  std::size_t key_count() const { return n_keys_; }

 private:
  CodecId id_;
  int bits_;
  std::size_t n_keys_ = 0;
  std::optional<Encoder> enc_;
  std::vector<CompressedKey> cks_;
  std::vector<Encoder::PreparedQuery> preps_;
  std::optional<TqMse> tq_;
  std::optional<TqQjl> tqq_;
  std::optional<Polar> polar_;
  std::vector<BaselineState> states_;
  std::vector<std::vector<double>> q_rots_;
  std::vector<TqQjl::PreparedQuery> tqq_preps_;
  const Matrix* raw_ = nullptr;
  const Matrix* queries_ = nullptr;
};

// Per-draw metrics; drivers aggregate rows across seeds.
inline MetricRow metric_suite(const Matrix& keys, const Matrix& queries, BoundCodec& codec) {
  if (keys.rows == 0 || queries.rows == 0) throw std::invalid_argument("empty metric inputs");
  codec.encode_keys(keys);
  codec.prepare_queries(queries);
  const std::size_t d = keys.cols;

  std::vector<double> cos_terms(keys.rows), mse_terms(keys.rows);
  for (std::size_t i = 0; i < keys.rows; ++i) {
    const std::vector<double> khat = codec.reconstruct(i);
    const double* k = keys.row(i);
    double dot = 0.0, nk = 0.0, nh = 0.0, err = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += k[j] * khat[j];
      nk += k[j] * k[j];
      nh += khat[j] * khat[j];
      const double e = k[j] - khat[j];
      err += e * e;
    }
    cos_terms[i] = nk > 0.0 && nh > 0.0 ? dot / std::sqrt(nk * nh) : 1.0;
    mse_terms[i] = err / static_cast<double>(d);
  }

  std::vector<double> ip_terms;
  ip_terms.reserve(keys.rows * queries.rows);
  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    const double* q = queries.row(qi);
    for (std::size_t ki = 0; ki < keys.rows; ++ki) {
      const double* k = keys.row(ki);
      double exact = 0.0;
      for (std::size_t j = 0; j < d; ++j) exact += q[j] * k[j];
      ip_terms.push_back(std::fabs(exact - codec.score(qi, ki)));
    }
  }

  MetricRow row;
  row.codec = codec_id_name(codec.id());
  row.bits = codec.bits();
  row.b_dir = codec.b_dir();
  row.b_nrm = codec.b_nrm();
  row.rounding = codec.rounding();
  row.seeds = 1;
  row.cosine = pairwise_sum(cos_terms) / static_cast<double>(keys.rows);
  row.mse = pairwise_sum(mse_terms) / static_cast<double>(keys.rows);
  row.ip = pairwise_sum(ip_terms) / static_cast<double>(ip_terms.size());
  return row;
}

struct SyntheticProbeConfig {
  std::uint32_t dim = 128;
  std::size_t n_keys = 1024;
  std::size_t n_queries = 16;
  int n_seeds = 64;
  std::vector<CodecId> codecs = {CodecId::tq_mse, CodecId::tq_qjl, CodecId::polar,
                                 CodecId::octo, CodecId::octo_qjl};
  std::vector<int> bits = {2, 3, 4};
  Rounding rounding = Rounding::scalar;
  std::uint64_t master_seed = kBenchMasterSeed;
  int threads = 1;

  void validate() const {
    if (dim == 0 || n_keys == 0 || n_queries == 0 || n_seeds <= 0 || codecs.empty() ||
        bits.empty())
      throw std::invalid_argument("all probe counts must be positive");
  }
};

namespace detail {

struct SeedScope {
  Matrix keys;
  Matrix queries;
  std::uint64_t rot_seed;
  std::uint64_t qjl_seed;
  Stream noise;
};

inline SeedScope seed_scope(std::uint64_t master, int seed, std::size_t n_keys,
                            std::size_t n_queries, std::uint32_t dim) {
  const Stream root = Stream(master).child(static_cast<std::uint64_t>(seed));
  SeedScope s{gaussian_matrix(root.child(0), n_keys, dim),
              gaussian_matrix(root.child(1), n_queries, dim), root.child(2).seed(),
              root.child(3).seed(), root.child(4)};
  return s;
}

template <typename Work>
void run_seeds(int n_seeds, int threads, Work&& work) {
  if (threads <= 1) {
    for (int s = 0; s < n_seeds; ++s) work(s);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&work, t, threads, n_seeds] {
      for (int s = t; s < n_seeds; s += threads) work(s);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Synthetic rate-quality table over shared seeds; one row per codec x bits.
inline std::vector<MetricRow> run_table1(const SyntheticProbeConfig& cfg) {
  cfg.validate();
  const std::size_t cells = cfg.codecs.size() * cfg.bits.size();
  std::vector<std::vector<double>> cos_by(cells), mse_by(cells), ip_by(cells);
  for (auto& v : cos_by) v.resize(cfg.n_seeds);
  for (auto& v : mse_by) v.resize(cfg.n_seeds);
  for (auto& v : ip_by) v.resize(cfg.n_seeds);
  std::vector<MetricRow> proto(cells);

  detail::run_seeds(cfg.n_seeds, cfg.threads, [&](int seed) {
    const detail::SeedScope sc =
        detail::seed_scope(cfg.master_seed, seed, cfg.n_keys, cfg.n_queries, cfg.dim);
    std::size_t cell = 0;
    for (CodecId id : cfg.codecs)
      for (int b : cfg.bits) {
        BoundCodec bc(id, b, cfg.dim, cfg.rounding, sc.rot_seed, sc.qjl_seed);
        const MetricRow r = metric_suite(sc.keys, sc.queries, bc);
        cos_by[cell][seed] = r.cosine;
        mse_by[cell][seed] = r.mse;
        ip_by[cell][seed] = r.ip;
        if (seed == 0) proto[cell] = r;
        ++cell;
      }
  });

  std::vector<MetricRow> rows(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    MetricRow row = proto[c];
    row.seeds = cfg.n_seeds;
    const MeanSe cos = mean_se(cos_by[c]);
    const MeanSe mse = mean_se(mse_by[c]);
    const MeanSe ip = mean_se(ip_by[c]);
    row.cosine = cos.mean;
    row.cosine_se = cos.se;
    row.mse = mse.mean;
    row.mse_se = mse.se;
    row.ip = ip.mean;
    row.ip_se = ip.se;
    rows[c] = row;
  }
  return rows;
}

struct NeedleConfig {
  std::uint32_t dim = 128;
  std::size_t distractors = 2048;
  double noise_fraction = 0.10;
  int n_seeds = 128;
  Rounding rounding = Rounding::local3x3;
  std::uint64_t master_seed = kBenchMasterSeed;
  int threads = 1;

  void validate() const {
    if (dim == 0 || distractors == 0 || n_seeds <= 0)
      throw std::invalid_argument("needle counts must be positive");
    if (noise_fraction < 0.0 || noise_fraction >= 1.0)
      throw std::invalid_argument("noise fraction must be in [0,1)");
  }
};

// Softmax mass on a planted key among distractors; keys live on the sqrt(d)
// shell so the retrieval gap is fixed across seeds.
inline MetricRow run_needle(const NeedleConfig& cfg, CodecId id, int bits) {
  cfg.validate();
  const std::uint32_t d = cfg.dim;
  const std::size_t n = cfg.distractors + 1;
  const double scale = std::sqrt(static_cast<double>(d));
  std::vector<double> mass_by(cfg.n_seeds);

  detail::run_seeds(cfg.n_seeds, cfg.threads, [&](int seed) {
    const Stream root = Stream(cfg.master_seed).child(static_cast<std::uint64_t>(seed));
    const std::uint64_t rot_seed = root.child(2).seed();
    const std::uint64_t qjl_seed = root.child(3).seed();
    Stream key_stream = root.child(0);
    Matrix keys(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      sample_unit_sphere(d, key_stream, keys.row(i));
      for (std::uint32_t j = 0; j < d; ++j) keys.row(i)[j] *= scale;
    }
    Stream noise = root.child(4);
    std::vector<double> g(d);
    noise.fill_gaussian(g.data(), d);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    gn = std::sqrt(gn);
    const double* needle = keys.row(0);
    double kn = 0.0;
    for (std::uint32_t j = 0; j < d; ++j) kn += needle[j] * needle[j];
    kn = std::sqrt(kn);
    Matrix queries(1, d);
    for (std::uint32_t j = 0; j < d; ++j)
      queries.row(0)[j] = needle[j] + cfg.noise_fraction * kn * g[j] / gn;

    BoundCodec bc(id, bits, d, cfg.rounding, rot_seed, qjl_seed);
    bc.encode_keys(keys);
    bc.prepare_queries(queries);

    std::vector<double> logits(n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = bc.score(0, i) / scale;
      m = std::max(m, logits[i]);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - m);
    mass_by[seed] = std::exp(logits[0] - m) / z;
  });

  MetricRow row;
  row.codec = codec_id_name(id);
  row.bits = id == CodecId::fp32 ? 32 : bits;
  row.seeds = cfg.n_seeds;
  row.has_mass = true;
  const MeanSe ms = mean_se(mass_by);
  row.mass = ms.mean;
  row.mass_se = ms.se;
  return row;
}

struct SweepRow {
  int b = 0;
  int delta = 0;
  int b_dir = 0;
  int b_nrm = 0;
  int seeds = 0;
  double mse = 0.0;
  double mse_delta_pct = 0.0;
  double one_minus_cos = 0.0;
  double one_minus_cos_delta_pct = 0.0;
};

struct BitsplitConfig {
  std::uint32_t dim = 128;
  std::size_t n_keys = 8192;
  int n_seeds = 4;
  Rounding rounding = Rounding::local3x3;
  std::uint64_t master_seed = kBenchMasterSeed;
  int threads = 1;
};

// Diagonal split sweep (b+delta, b-delta) against the uniform (b,b) split.
inline std::vector<SweepRow> run_bitsplit_sweep(const BitsplitConfig& cfg) {
  struct Cell {
    int b, delta, b_dir, b_nrm;
  };
  std::vector<Cell> cells;
  for (int b : {2, 3, 4})
    for (int delta = -2; delta <= 2; ++delta) {
      const int bd = b + delta, bn = b - delta;
      if (bd < 1 || bn < 1 || bd > 8 || bn > 8) continue;
      cells.push_back({b, delta, bd, bn});
    }

  std::vector<std::vector<double>> mse_by(cells.size()), omc_by(cells.size());
  for (auto& v : mse_by) v.resize(cfg.n_seeds);
  for (auto& v : omc_by) v.resize(cfg.n_seeds);

  detail::run_seeds(cfg.n_seeds, cfg.threads, [&](int seed) {
    const detail::SeedScope sc = detail::seed_scope(cfg.master_seed, seed, cfg.n_keys, 1, cfg.dim);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CodecConfig cc;
      cc.dim = cfg.dim;
      cc.b_dir = static_cast<std::uint8_t>(cells[c].b_dir);
      cc.b_nrm = static_cast<std::uint8_t>(cells[c].b_nrm);
      cc.rounding = cfg.rounding;
      cc.rotation_seed = sc.rot_seed;
      const Encoder enc(cc);
      double mse_sum = 0.0, cos_sum = 0.0;
      for (std::size_t i = 0; i < cfg.n_keys; ++i) {
        const std::span<const double> k(sc.keys.row(i), cfg.dim);
        const std::vector<double> khat = enc.decode(enc.encode(k));
        double dot = 0.0, nk = 0.0, nh = 0.0, err = 0.0;
        for (std::uint32_t j = 0; j < cfg.dim; ++j) {
          dot += k[j] * khat[j];
          nk += k[j] * k[j];
          nh += khat[j] * khat[j];
          const double e = k[j] - khat[j];
          err += e * e;
        }
        mse_sum += err / cfg.dim;
        cos_sum += dot / std::sqrt(nk * nh);
      }
      mse_by[c][seed] = mse_sum / static_cast<double>(cfg.n_keys);
      omc_by[c][seed] = 1.0 - cos_sum / static_cast<double>(cfg.n_keys);
    }
  });

  std::vector<SweepRow> rows(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    rows[c].b = cells[c].b;
    rows[c].delta = cells[c].delta;
    rows[c].b_dir = cells[c].b_dir;
    rows[c].b_nrm = cells[c].b_nrm;
    rows[c].seeds = cfg.n_seeds;
    rows[c].mse = mean_se(mse_by[c]).mean;
    rows[c].one_minus_cos = mean_se(omc_by[c]).mean;
  }
  for (SweepRow& r : rows) {
    const SweepRow* ref = nullptr;
    for (const SweepRow& s : rows)
      if (s.b == r.b && s.delta == 0) ref = &s;
    r.mse_delta_pct = 100.0 * (r.mse - ref->mse) / ref->mse;
    r.one_minus_cos_delta_pct =
        100.0 * (r.one_minus_cos - ref->one_minus_cos) / ref->one_minus_cos;
  }
  return rows;
}

struct AblationRow {
  int b = 0;
  int b_dir = 0;
  int b_nrm = 0;
  std::string mode;
  int seeds = 0;
  double cosine = 0.0;
  double mse = 0.0;
  double mse_delta_pct = 0.0;
  double tail95 = 0.0;
  double ip = 0.0;
};

struct RoundingAblationConfig {
  std::uint32_t dim = 128;
  std::size_t n_keys = 4096;
  std::size_t n_queries = 64;
  int n_seeds = 5;
  std::uint64_t master_seed = kBenchMasterSeed;
  int threads = 1;
};

// Rounding-mode ablation; tail95 is the nearest-rank 95th percentile of
// per-key per-coord squared error pooled across seeds.
inline std::vector<AblationRow> run_rounding_ablation(const RoundingAblationConfig& cfg) {
  const std::array<Rounding, 4> modes = {Rounding::scalar, Rounding::local2x2,
                                         Rounding::local3x3, Rounding::full};
  const std::array<int, 4> nominal = {1, 2, 3, 4};
  const std::size_t cells = nominal.size() * modes.size();

  std::vector<std::vector<double>> cos_by(cells), mse_by(cells), ip_by(cells);
  std::vector<std::vector<double>> sq_by(cells);  // pooled per-key squared errors
  for (auto& v : cos_by) v.resize(cfg.n_seeds);
  for (auto& v : mse_by) v.resize(cfg.n_seeds);
  for (auto& v : ip_by) v.resize(cfg.n_seeds);
  for (auto& v : sq_by) v.resize(cfg.n_seeds * cfg.n_keys);

  detail::run_seeds(cfg.n_seeds, cfg.threads, [&](int seed) {
    const detail::SeedScope sc =
        detail::seed_scope(cfg.master_seed, seed, cfg.n_keys, cfg.n_queries, cfg.dim);
    std::size_t cell = 0;
    for (std::size_t bi = 0; bi < nominal.size(); ++bi) {
      const int b = nominal[bi];
      const auto [bd, bn] = b >= 2 ? default_bit_split(b) : std::pair<int, int>{1, 1};
      for (Rounding mode : modes) {
        CodecConfig cc;
        cc.dim = cfg.dim;
        cc.b_dir = static_cast<std::uint8_t>(bd);
        cc.b_nrm = static_cast<std::uint8_t>(bn);
        cc.rounding = mode;
        cc.rotation_seed = sc.rot_seed;
        const Encoder enc(cc);

        std::vector<CompressedKey> cks;
        cks.reserve(cfg.n_keys);
        double cos_sum = 0.0, mse_sum = 0.0;
        for (std::size_t i = 0; i < cfg.n_keys; ++i) {
          const std::span<const double> k(sc.keys.row(i), cfg.dim);
          cks.push_back(enc.encode(k));
          const std::vector<double> khat = enc.decode(cks.back());
          double dot = 0.0, nk = 0.0, nh = 0.0, err = 0.0;
          for (std::uint32_t j = 0; j < cfg.dim; ++j) {
            dot += k[j] * khat[j];
            nk += k[j] * k[j];
            nh += khat[j] * khat[j];
            const double e = k[j] - khat[j];
            err += e * e;
          }
          cos_sum += dot / std::sqrt(nk * nh);
          const double per_coord = err / cfg.dim;
          mse_sum += per_coord;
          sq_by[cell][static_cast<std::size_t>(seed) * cfg.n_keys + i] = per_coord;
        }
        double ip_sum = 0.0;
        for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
          const auto prep = enc.prepare(std::span(sc.queries.row(qi), cfg.dim));
          for (std::size_t ki = 0; ki < cfg.n_keys; ++ki) {
            const double* q = sc.queries.row(qi);
            const double* k = sc.keys.row(ki);
            double exact = 0.0;
            for (std::uint32_t j = 0; j < cfg.dim; ++j) exact += q[j] * k[j];
            ip_sum += std::fabs(exact - enc.score(prep, cks[ki]));
          }
        }
        cos_by[cell][seed] = cos_sum / static_cast<double>(cfg.n_keys);
        mse_by[cell][seed] = mse_sum / static_cast<double>(cfg.n_keys);
        ip_by[cell][seed] = ip_sum / static_cast<double>(cfg.n_queries * cfg.n_keys);
        ++cell;
      }
    }
  });

  std::vector<AblationRow> rows(cells);
  std::size_t cell = 0;
  for (std::size_t bi = 0; bi < nominal.size(); ++bi) {
    const int b = nominal[bi];
    const auto [bd, bn] = b >= 2 ? default_bit_split(b) : std::pair<int, int>{1, 1};
    for (Rounding mode : modes) {
      AblationRow& r = rows[cell];
      r.b = b;
      r.b_dir = bd;
      r.b_nrm = bn;
      r.mode = rounding_name(mode);
      r.seeds = cfg.n_seeds;
      r.cosine = mean_se(cos_by[cell]).mean;
      r.mse = mean_se(mse_by[cell]).mean;
      r.ip = mean_se(ip_by[cell]).mean;
      std::vector<double> pooled = sq_by[cell];
      std::sort(pooled.begin(), pooled.end());
      const std::size_t rank = static_cast<std::size_t>(
          std::ceil(0.95 * static_cast<double>(pooled.size())));
      r.tail95 = pooled[rank - 1];
      ++cell;
    }
  }
  for (std::size_t c = 0; c < cells; ++c) {
    const AblationRow& scalar_row = rows[(c / modes.size()) * modes.size()];
    rows[c].mse_delta_pct = 100.0 * (rows[c].mse - scalar_row.mse) / scalar_row.mse;
  }
  return rows;
}

// ---- CSV / JSON ------------------------------------------------------------

namespace detail {

inline std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string opt_int(int v) { return v > 0 ? std::to_string(v) : std::string(); }

}  // namespace detail

inline std::string table1_csv(const std::vector<MetricRow>& rows) {
  std::string out =
      "codec,bits,b_dir,b_nrm,rounding,seeds,cosine,cosine_se,mse,mse_se,ip_abs_err,ip_abs_err_se\n";
  for (const MetricRow& r : rows) {
    out += r.codec + "," + std::to_string(r.bits) + "," + detail::opt_int(r.b_dir) + "," +
           detail::opt_int(r.b_nrm) + "," + r.rounding + "," + std::to_string(r.seeds) + "," +
           detail::g6(r.cosine) + "," + detail::g6(r.cosine_se) + "," + detail::g6(r.mse) + "," +
           detail::g6(r.mse_se) + "," + detail::g6(r.ip) + "," + detail::g6(r.ip_se) + "\n";
  }
  return out;
}

inline std::string needle_csv(const std::vector<MetricRow>& rows) {
  std::string out = "codec,bits,seeds,softmax_mass,softmax_mass_se\n";
  for (const MetricRow& r : rows)
    out += r.codec + "," + std::to_string(r.bits) + "," + std::to_string(r.seeds) + "," +
           detail::g6(r.mass) + "," + detail::g6(r.mass_se) + "\n";
  return out;
}

inline std::string bitsplit_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "b,delta,b_dir,b_nrm,seeds,mse,mse_delta_pct,one_minus_cos,one_minus_cos_delta_pct\n";
  for (const SweepRow& r : rows)
    out += std::to_string(r.b) + "," + std::to_string(r.delta) + "," + std::to_string(r.b_dir) +
           "," + std::to_string(r.b_nrm) + "," + std::to_string(r.seeds) + "," +
           detail::g6(r.mse) + "," + detail::g6(r.mse_delta_pct) + "," +
           detail::g6(r.one_minus_cos) + "," + detail::g6(r.one_minus_cos_delta_pct) + "\n";
  return out;
}

inline std::string rounding_csv(const std::vector<AblationRow>& rows) {
  std::string out = "b,b_dir,b_nrm,mode,seeds,cosine,mse,mse_delta_pct,tail95,ip_abs_err\n";
  for (const AblationRow& r : rows)
    out += std::to_string(r.b) + "," + std::to_string(r.b_dir) + "," + std::to_string(r.b_nrm) +
           "," + r.mode + "," + std::to_string(r.seeds) + "," + detail::g6(r.cosine) + "," +
           detail::g6(r.mse) + "," + detail::g6(r.mse_delta_pct) + "," + detail::g6(r.tail95) +
           "," + detail::g6(r.ip) + "\n";
  return out;
}

}  // namespace octoquant
