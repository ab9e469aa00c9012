#include "octoquant/codec.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "octoquant/attention.hpp"
#include "octoquant/books.hpp"
#include "octoquant/marginals.hpp"
#include "octoquant/qjl.hpp"
#include "octoquant/rng.hpp"
#include "octoquant/rotation.hpp"

namespace {

using namespace octoquant;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double triplet_loss(const double t[3], const Books& bk, const TripletCode& c) {
  const auto n = oct_decode(bk.xi->value(c.ixi), bk.xi->value(c.ieta));
  const double r = bk.rho->value(c.irho);
  double l = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double d = t[j] - r * n[j];
    l += d * d;
  }
  return l;
}

TEST(Config, ValidatesFields) {
  CodecConfig cfg;
  cfg.dim = 96;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.dim = 2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = CodecConfig{};
  cfg.b_dir = 9;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = CodecConfig{};
  cfg.qjl = true;
  cfg.qjl_seed = cfg.rotation_seed;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.qjl_seed = cfg.rotation_seed + 1;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, DefaultBitSplit) {
  EXPECT_EQ(default_bit_split(2), (std::pair<int, int>{3, 1}));
  EXPECT_EQ(default_bit_split(3), (std::pair<int, int>{4, 2}));
  EXPECT_EQ(default_bit_split(4), (std::pair<int, int>{5, 3}));
  EXPECT_THROW(default_bit_split(1), std::invalid_argument);
}

TEST(Encode, ZeroKeyIsInert) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  const std::vector<double> zero(cfg.dim, 0.0);
  const CompressedKey ck = enc.encode(zero);
  EXPECT_EQ(ck.gamma, 0.0f);
  for (double v : enc.decode(ck)) EXPECT_EQ(v, 0.0);
}

TEST(Encode, RejectsDimensionMismatch) {
  const Encoder enc(CodecConfig{});
  const std::vector<double> k(64, 1.0);
  EXPECT_THROW(enc.encode(k), std::invalid_argument);
}

TEST(Encode, BasisVectorMatchesExhaustiveSearch) {
  CodecConfig cfg;
  cfg.dim = 4;
  cfg.b_dir = 2;
  cfg.b_nrm = 2;
  cfg.rounding = Rounding::full;
  const Encoder enc(cfg);
  const std::vector<double> k = {5.0, 0.0, 0.0, 0.0};
  const CompressedKey ck = enc.encode(k);
  EXPECT_EQ(ck.gamma, 5.0f);

  const Rotation rot(4, cfg.rotation_seed);
  const std::vector<double> ur = rot.apply({1.0, 0.0, 0.0, 0.0});
  const double padded[6] = {ur[0], ur[1], ur[2], ur[3], 0.0, 0.0};
  const Books& bk = enc.books();
  for (int t = 0; t < 2; ++t) {
    // Exhaustive per-triplet minimizer of the reconstruction loss.
    double best = 1e300;
    std::uint32_t bi = 0, bj = 0, br = 0;
    for (std::uint32_t i = 0; i < bk.xi->size(); ++i)
      for (std::uint32_t j = 0; j < bk.xi->size(); ++j)
        for (std::uint32_t r = 0; r < bk.rho->size(); ++r) {
          const TripletCode cand{i, j, r, 0.0};
          const double l = triplet_loss(padded + 3 * t, bk, cand);
          if (l < best) {
            best = l;
            bi = i;
            bj = j;
            br = r;
          }
        }
    EXPECT_EQ(ck.dir[2 * t], bi);
    EXPECT_EQ(ck.dir[2 * t + 1], bj);
    EXPECT_EQ(ck.nrm[t], br);
  }
}

TEST(JointRound, ExactSeedIsKeptByEveryMode) {
  // Books with an exactly representable direction (0,0).
  Codebook xi;
  xi.kind = BookKind::custom;
  xi.bits = 2;
  xi.lo = -1.0;
  xi.hi = 1.0;
  xi.centroids = {-0.8, -0.4, 0.0, 0.6};
  xi.rebuild_boundaries();
  Codebook rho;
  rho.kind = BookKind::custom;
  rho.bits = 1;
  rho.lo = 0.0;
  rho.hi = 1.0;
  rho.centroids = {0.1, 0.8};
  rho.rebuild_boundaries();
  const Books bk = Books::custom(xi, rho);

  const double t[3] = {0.0, 0.0, 0.1};
  for (Rounding mode :
       {Rounding::scalar, Rounding::local2x2, Rounding::local3x3, Rounding::full}) {
    const TripletCode c = joint_round_triplet(t, bk, mode);
    EXPECT_EQ(c.ixi, 2u);
    EXPECT_EQ(c.ieta, 2u);
    EXPECT_DOUBLE_EQ(c.s, 0.1);
    EXPECT_EQ(c.irho, 0u);  // 0.1 is nearer 0.1 than 0.8
  }
}

TEST(JointRound, Local3x3TracksFullSearch) {
  // The clamped 3x3 window can miss seam-mirrored optima on a tiny fraction
  // of triplets; the searched set is a subset, so full never loses, and the
  // aggregate loss agrees to far better than reporting precision.
  Stream st(7);
  for (int b : {2, 3, 4, 5}) {
    const Books bk = Books::custom(xi_book(b), rho_book(128, 2));
    int mismatches = 0;
    double sum3 = 0.0, sumf = 0.0;
    for (int i = 0; i < 10000; ++i) {
      double t[3];
      sample_unit_sphere(3, st, t);
      const double rho = st.next_unit();
      for (double& v : t) v *= rho;
      const TripletCode c3 = joint_round_triplet(t, bk, Rounding::local3x3);
      const TripletCode cf = joint_round_triplet(t, bk, Rounding::full);
      const double l3 = triplet_loss(t, bk, c3);
      const double lf = triplet_loss(t, bk, cf);
      EXPECT_LE(lf, l3 * (1.0 + 1e-12));
      sum3 += l3;
      sumf += lf;
      mismatches += c3.ixi != cf.ixi || c3.ieta != cf.ieta || c3.irho != cf.irho;
    }
    EXPECT_LE(mismatches, 30) << "b_dir " << b;
    EXPECT_NEAR(sum3 / sumf, 1.0, 1e-4) << "b_dir " << b;
  }
}

TEST(JointRound, JointModesNeverLoseToScalar) {
  Stream st(11);
  const Books bk = Books::custom(xi_book(3), rho_book(128, 1));
  for (int i = 0; i < 100000; ++i) {
    double t[3];
    sample_unit_sphere(3, st, t);
    const double rho = st.next_unit();
    for (double& v : t) v *= rho;
    const double ls = triplet_loss(t, bk, joint_round_triplet(t, bk, Rounding::scalar));
    for (Rounding mode : {Rounding::local2x2, Rounding::local3x3, Rounding::full}) {
      const double lm = triplet_loss(t, bk, joint_round_triplet(t, bk, mode));
      EXPECT_LE(lm, ls * (1.0 + 1e-12));
    }
  }
}

TEST(Decode, CodeAssignmentIsIdempotent) {
  CodecConfig cfg;  // d=128, (3,1)
  const Encoder enc(cfg);
  Stream st(13);
  std::vector<double> k(cfg.dim);
  for (int n = 0; n < 10000; ++n) {
    st.fill_gaussian(k.data(), k.size());
    const CompressedKey a = enc.encode(k);
    const CompressedKey b = enc.encode(enc.decode(a));
    EXPECT_EQ(a.dir, b.dir);
    EXPECT_EQ(a.nrm, b.nrm);
  }
}

TEST(Decode, AllZeroIndicesNormIsConsistent) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  CompressedKey ck;
  ck.gamma = 1.0f;
  ck.dir.assign(2 * cfg.n_tri(), 0);
  ck.nrm.assign(cfg.n_tri(), 0);
  const std::vector<double> dec = enc.decode(ck);
  // 42 full triplets contribute rho0^2 each; the padded one only its first
  // two direction components survive truncation.
  const Books& bk = enc.books();
  const double rho0 = bk.rho->value(0);
  const auto n0 = oct_decode(bk.xi->value(0), bk.xi->value(0));
  const double expected =
      std::sqrt(rho0 * rho0 * (42.0 + n0[0] * n0[0] + n0[1] * n0[1]));
  EXPECT_NEAR(norm(dec), expected, 1e-12);
}

TEST(Decode, RejectsMalformedCodes) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  CompressedKey ck;
  ck.gamma = 1.0f;
  ck.dir.assign(2 * cfg.n_tri(), 0);
  ck.nrm.assign(cfg.n_tri(), 0);
  ck.dir[0] = 8;  // b_dir=3 allows 0..7
  EXPECT_THROW(enc.decode(ck), FormatError);
  ck.dir[0] = 0;
  ck.nrm[3] = 2;  // b_nrm=1 allows 0..1
  EXPECT_THROW(enc.decode(ck), FormatError);
  ck.nrm[3] = 0;
  ck.dir.pop_back();
  EXPECT_THROW(enc.decode(ck), FormatError);
}

TEST(Score, EqualsDotWithDecode) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(17);
  std::vector<CompressedKey> keys;
  std::vector<std::vector<double>> decoded;
  std::vector<double> k(cfg.dim);
  for (int i = 0; i < 100; ++i) {
    st.fill_gaussian(k.data(), k.size());
    keys.push_back(enc.encode(k));
    decoded.push_back(enc.decode(keys.back()));
  }
  std::vector<double> q(cfg.dim);
  for (int i = 0; i < 100; ++i) {
    st.fill_gaussian(q.data(), q.size());
    const auto prep = enc.prepare(q);
    for (int j = 0; j < 100; ++j) {
      const double s = enc.score(prep, keys[j]);
      const double ref = dot(q, decoded[j]);
      EXPECT_NEAR(s, ref, 1e-9 * std::max(1.0, norm(q) * norm(decoded[j])));
      EXPECT_EQ(enc.score(q, keys[j]), s);  // raw-q entry point
    }
  }
}

TEST(Score, QjlCorrectionIsSeedUnbiased) {
  const std::uint32_t d = 128;
  CodecConfig cfg;  // non-QJL stage fixes the residual
  const Encoder enc(cfg);
  Stream st(19);
  std::vector<double> k(d), q(d);
  st.fill_gaussian(k.data(), d);
  st.fill_gaussian(q.data(), d);

  const CompressedKey ck = enc.encode(k);
  const Rotation rot(d, cfg.rotation_seed);
  const double gamma = norm(k);
  std::vector<double> u(d);
  for (std::uint32_t i = 0; i < d; ++i) u[i] = k[i] / gamma;
  const std::vector<double> ur = rot.apply(u);
  std::vector<double> r = enc.reconstruct_rotated(ck);
  for (std::uint32_t i = 0; i < d; ++i) r[i] = ur[i] - r[i];
  const std::vector<double> q_rot = rot.apply(q);
  const double truth = dot(q_rot, r);

  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 512; ++seed) {
    const QjlSidecar sc = qjl_encode(d, seed, r);
    const Rotation sketch_rot(d, seed);
    const std::vector<double> q_sketch = sketch_rot.apply(q_rot);
    errs.push_back(qjl_estimate(d, q_sketch, sc) - truth);
  }
  double mean = 0.0;
  for (double e : errs) mean += e;
  mean /= static_cast<double>(errs.size());
  double var = 0.0;
  for (double e : errs) var += (e - mean) * (e - mean);
  var /= static_cast<double>(errs.size() - 1);
  const double stderr_mean = std::sqrt(var / static_cast<double>(errs.size()));
  EXPECT_LE(std::fabs(mean), 3.0 * stderr_mean);
}

TEST(Attention, SplitCountDoesNotChangeOutput) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(23);
  const std::size_t len = 257, vdim = 16;
  std::vector<CompressedKey> cache;
  std::vector<double> k(cfg.dim);
  for (std::size_t i = 0; i < len; ++i) {
    st.fill_gaussian(k.data(), k.size());
    cache.push_back(enc.encode(k));
  }
  Matrix values(len, vdim);
  st.fill_gaussian(values.data.data(), values.data.size());
  std::vector<double> q(cfg.dim);
  st.fill_gaussian(q.data(), q.size());

  const std::vector<double> s1 = attention_decode(enc, q, cache, values, 1);
  const std::vector<double> s8 = attention_decode(enc, q, cache, values, 8);
  for (std::size_t j = 0; j < vdim; ++j) EXPECT_NEAR(s8[j], s1[j], 1e-6);

  // Direct softmax reference.
  const auto prep = enc.prepare(q);
  std::vector<double> logits(len);
  double m = -1e300;
  for (std::size_t t = 0; t < len; ++t) {
    logits[t] = enc.score(prep, cache[t]) / std::sqrt(static_cast<double>(cfg.dim));
    m = std::max(m, logits[t]);
  }
  double z = 0.0;
  std::vector<double> ref(vdim, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    const double w = std::exp(logits[t] - m);
    z += w;
    for (std::size_t j = 0; j < vdim; ++j) ref[j] += w * values.row(t)[j];
  }
  for (std::size_t j = 0; j < vdim; ++j) EXPECT_NEAR(s1[j], ref[j] / z, 1e-9);
}

TEST(Attention, SingleKeyReturnsItsValueRow) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(29);
  std::vector<double> k(cfg.dim), q(cfg.dim);
  st.fill_gaussian(k.data(), k.size());
  st.fill_gaussian(q.data(), q.size());
  const std::vector<CompressedKey> cache = {enc.encode(k)};
  Matrix values(1, 8);
  st.fill_gaussian(values.data.data(), values.data.size());
  const std::vector<double> out = attention_decode(enc, q, cache, values, 1);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(out[j], values.row(0)[j]);
}

TEST(Attention, RejectsBadShapes) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(31);
  std::vector<double> q(cfg.dim);
  st.fill_gaussian(q.data(), q.size());
  const Matrix values(2, 8);
  EXPECT_THROW(attention_decode(enc, q, {}, values, 1), std::invalid_argument);
}

TEST(Invariants, TripletNormsSumToOne) {
  for (std::uint32_t d : {4u, 128u}) {
    const Rotation rot(d, 37);
    const std::uint32_t nt = (d + 2) / 3;
    Stream st(41 + d);
    std::vector<double> u(d), ur(d);
    for (int n = 0; n < 1000; ++n) {
      sample_unit_sphere(d, st, u.data());
      rot.apply(u.data(), ur.data());
      std::vector<double> padded(3 * nt, 0.0);
      std::copy(ur.begin(), ur.end(), padded.begin());
      double sum = 0.0;
      for (std::uint32_t t = 0; t < nt; ++t)
        sum += padded[3 * t] * padded[3 * t] + padded[3 * t + 1] * padded[3 * t + 1] +
               padded[3 * t + 2] * padded[3 * t + 2];
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Invariants, MoreDirectionBitsNeverHurt) {
  Stream st(43);
  CodecConfig lo;
  lo.b_dir = 3;
  lo.b_nrm = 2;
  CodecConfig hi = lo;
  hi.b_dir = 4;
  const Encoder enc_lo(lo), enc_hi(hi);
  std::vector<double> k(lo.dim);
  double cos_lo = 0.0, cos_hi = 0.0;
  for (int n = 0; n < 10000; ++n) {
    st.fill_gaussian(k.data(), k.size());
    const std::vector<double> a = enc_lo.decode(enc_lo.encode(k));
    const std::vector<double> b = enc_hi.decode(enc_hi.encode(k));
    cos_lo += dot(k, a) / (norm(k) * norm(a));
    cos_hi += dot(k, b) / (norm(k) * norm(b));
  }
  EXPECT_GE(cos_hi, cos_lo);
}

TEST(Invariants, EncodeIsDeterministic) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(47);
  std::vector<double> k(cfg.dim);
  st.fill_gaussian(k.data(), k.size());
  EXPECT_EQ(pack(cfg, enc.encode(k)), pack(cfg, enc.encode(k)));
}

TEST(Wire, PayloadIs43BytesAtDefaultConfig) {
  CodecConfig cfg;  // d=128, (3,1), no sidecar
  const Encoder enc(cfg);
  Stream st(53);
  std::vector<double> k(cfg.dim);
  st.fill_gaussian(k.data(), k.size());
  const auto blob = pack(cfg, enc.encode(k));
  // 20-byte header, then gamma f32 + ceil(86*3/8) + ceil(43*1/8) = 43.
  EXPECT_EQ(blob.size(), 20u + 43u);
}

TEST(Wire, RoundTripsRandomStatesAcrossAllSplits) {
  Stream st(59);
  const std::uint32_t d = 16, nt = 6;
  for (int b_dir = 1; b_dir <= 8; ++b_dir)
    for (int b_nrm = 1; b_nrm <= 8; ++b_nrm)
      for (int qjl = 0; qjl < 2; ++qjl) {
        CodecConfig cfg;
        cfg.dim = d;
        cfg.b_dir = static_cast<std::uint8_t>(b_dir);
        cfg.b_nrm = static_cast<std::uint8_t>(b_nrm);
        cfg.qjl = qjl == 1;
        std::vector<CompressedKey> keys(800);
        for (CompressedKey& ck : keys) {
          ck.gamma = static_cast<float>(st.next_unit() * 100.0);
          ck.dir.resize(2 * nt);
          ck.nrm.resize(nt);
          for (auto& v : ck.dir)
            v = static_cast<std::uint16_t>(st.next_u64() & ((1u << b_dir) - 1u));
          for (auto& v : ck.nrm)
            v = static_cast<std::uint16_t>(st.next_u64() & ((1u << b_nrm) - 1u));
          if (cfg.qjl) {
            QjlSidecar sc;
            sc.gamma_r = static_cast<std::uint16_t>(st.next_u64() & 0x7bff);
            sc.signs.resize(2);
            for (auto& b : sc.signs) b = static_cast<std::uint8_t>(st.next_u64());
            ck.qjl = sc;
          }
        }
        const auto blob = pack_keys(cfg, keys);
        const PackedBlob back = unpack_keys(blob);
        ASSERT_EQ(back.keys.size(), keys.size());
        EXPECT_EQ(back.dim, d);
        EXPECT_EQ(back.qjl, cfg.qjl);
        for (std::size_t i = 0; i < keys.size(); ++i) {
          EXPECT_EQ(back.keys[i].gamma, keys[i].gamma);
          EXPECT_EQ(back.keys[i].dir, keys[i].dir);
          EXPECT_EQ(back.keys[i].nrm, keys[i].nrm);
          if (cfg.qjl) {
            EXPECT_EQ(back.keys[i].qjl->gamma_r, keys[i].qjl->gamma_r);
            EXPECT_EQ(back.keys[i].qjl->signs, keys[i].qjl->signs);
          }
        }
      }
}

TEST(Wire, EveryPayloadBitMatters) {
  // d=4, (2,4): both bit streams fill their bytes exactly, so all 48 payload
  // bits are live and any flip must surface in an unpacked field.
  CodecConfig cfg;
  cfg.dim = 4;
  cfg.b_dir = 2;
  cfg.b_nrm = 4;
  const Encoder enc(cfg);
  Stream st(61);
  std::vector<double> k(4);
  st.fill_gaussian(k.data(), k.size());
  const CompressedKey orig = enc.encode(k);
  const auto blob = pack(cfg, orig);
  ASSERT_EQ(blob.size(), 20u + 6u);
  for (std::size_t bit = 160; bit < blob.size() * 8; ++bit) {
    auto flipped = blob;
    flipped[bit >> 3] ^= static_cast<std::uint8_t>(1u << (bit & 7));
    bool changed = false;
    try {
      const CompressedKey ck = unpack(cfg, flipped);
      changed = std::bit_cast<std::uint32_t>(ck.gamma) !=
                    std::bit_cast<std::uint32_t>(orig.gamma) ||
                ck.dir != orig.dir || ck.nrm != orig.nrm;
    } catch (const FormatError&) {
      changed = true;
    }
    EXPECT_TRUE(changed) << "bit " << bit;
  }
}

TEST(Wire, DirtyPaddingIsRejected) {
  // d=4, (3,1): 4 pad bits in the direction stream, 6 in the norm stream.
  CodecConfig cfg;
  cfg.dim = 4;
  cfg.b_dir = 3;
  cfg.b_nrm = 1;
  const Encoder enc(cfg);
  Stream st(67);
  std::vector<double> k(4);
  st.fill_gaussian(k.data(), k.size());
  const auto blob = pack(cfg, enc.encode(k));
  ASSERT_EQ(blob.size(), 20u + 4u + 2u + 1u);
  const auto expect_reject = [&](std::size_t byte, unsigned bit) {
    auto bad = blob;
    bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
    EXPECT_THROW(unpack_keys(bad), FormatError) << byte << ":" << bit;
  };
  for (unsigned bit = 4; bit < 8; ++bit) expect_reject(25, bit);  // dir pad
  for (unsigned bit = 2; bit < 8; ++bit) expect_reject(26, bit);  // nrm pad
}

TEST(Wire, RejectsHeaderMismatch) {
  CodecConfig cfg;
  const Encoder enc(cfg);
  Stream st(71);
  std::vector<double> k(cfg.dim);
  st.fill_gaussian(k.data(), k.size());
  const auto blob = pack(cfg, enc.encode(k));
  CodecConfig other = cfg;
  other.b_dir = 4;
  EXPECT_THROW(unpack(other, blob), std::invalid_argument);
  auto bad = blob;
  bad[0] = 'X';
  EXPECT_THROW(unpack_keys(bad), FormatError);
  EXPECT_THROW(unpack_keys(blob.data(), blob.size() - 1), FormatError);
}

TEST(Rate, EffectiveBitsPerCoordinate) {
  CodecConfig cfg;  // d=128, (3,1)
  EXPECT_DOUBLE_EQ(effective_bits_per_coord(cfg), 333.0 / 128.0);  // 2.6016
  CodecConfig qjl = cfg;
  qjl.qjl = true;
  EXPECT_DOUBLE_EQ(effective_bits_per_coord(qjl) - effective_bits_per_coord(cfg), 1.125);
  CodecConfig d64;
  d64.dim = 64;
  d64.b_dir = 5;
  d64.b_nrm = 3;
  // n_tri = 22: (2*22*5 + 22*3 + 32) / 64.
  EXPECT_DOUBLE_EQ(effective_bits_per_coord(d64), 318.0 / 64.0);
}

}  // namespace
