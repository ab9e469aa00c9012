// Command-line front end: codebook training, benchmark drivers, sweeps, and
// single-file roundtrips. Results go to stdout as CSV unless --out is given.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "octoquant/bench.hpp"
#include "octoquant/books.hpp"
#include "octoquant/codec.hpp"
#include "octoquant/io.hpp"
#include "octoquant/lloydmax.hpp"

namespace oq = octoquant;
using nlohmann::json;

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  oq::write_file(out_path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<oq::CodecId> parse_codecs(const std::vector<std::string>& names) {
  std::vector<oq::CodecId> ids;
  ids.reserve(names.size());
  for (const std::string& n : names) ids.push_back(oq::parse_codec_id(n));
  return ids;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json table1_json(const std::vector<oq::MetricRow>& rows) {
  json arr = json::array();
  for (const oq::MetricRow& r : rows)
    arr.push_back({{"codec", r.codec},
                   {"bits", r.bits},
                   {"b_dir", r.b_dir},
                   {"b_nrm", r.b_nrm},
                   {"rounding", r.rounding},
                   {"seeds", r.seeds},
                   {"cosine", r.cosine},
                   {"cosine_se", r.cosine_se},
                   {"mse", r.mse},
                   {"mse_se", r.mse_se},
                   {"ip_abs_err", r.ip},
                   {"ip_abs_err_se", r.ip_se}});
  return arr;
}

json needle_json(const std::vector<oq::MetricRow>& rows) {
  json arr = json::array();
  for (const oq::MetricRow& r : rows)
    arr.push_back({{"codec", r.codec},
                   {"bits", r.bits},
                   {"seeds", r.seeds},
                   {"softmax_mass", r.mass},
                   {"softmax_mass_se", r.mass_se}});
  return arr;
}

json bitsplit_json(const std::vector<oq::SweepRow>& rows) {
  json arr = json::array();
  for (const oq::SweepRow& r : rows)
    arr.push_back({{"b", r.b},
                   {"delta", r.delta},
                   {"b_dir", r.b_dir},
                   {"b_nrm", r.b_nrm},
                   {"seeds", r.seeds},
                   {"mse", r.mse},
                   {"mse_delta_pct", r.mse_delta_pct},
                   {"one_minus_cos", r.one_minus_cos},
                   {"one_minus_cos_delta_pct", r.one_minus_cos_delta_pct}});
  return arr;
}

json rounding_json(const std::vector<oq::AblationRow>& rows) {
  json arr = json::array();
  for (const oq::AblationRow& r : rows)
    arr.push_back({{"b", r.b},
                   {"b_dir", r.b_dir},
                   {"b_nrm", r.b_nrm},
                   {"mode", r.mode},
                   {"seeds", r.seeds},
                   {"cosine", r.cosine},
                   {"mse", r.mse},
                   {"mse_delta_pct", r.mse_delta_pct},
                   {"tail95", r.tail95},
                   {"ip_abs_err", r.ip}});
  return arr;
}

struct TrainArgs {
  std::uint32_t dim = 128;
  std::vector<int> bits;
  std::string out;
};

void run_train(const TrainArgs& a) {
  std::filesystem::create_directories(a.out);
  for (int b : a.bits) {
    if (b < 1 || b > 8) throw std::invalid_argument("bits must be in [1, 8]");
    const std::filesystem::path xi_path =
        std::filesystem::path(a.out) / ("xi_b" + std::to_string(b) + ".ocbk");
    oq::write_file(xi_path.string(), oq::serialize(oq::xi_book(b)));
    std::printf("%s\n", xi_path.string().c_str());
    const std::filesystem::path rho_path =
        std::filesystem::path(a.out) /
        ("rho_d" + std::to_string(a.dim) + "_b" + std::to_string(b) + ".ocbk");
    oq::write_file(rho_path.string(), oq::serialize(oq::rho_book(a.dim, b)));
    std::printf("%s\n", rho_path.string().c_str());
  }
}

struct Table1Args {
  oq::SyntheticProbeConfig cfg;
  std::vector<std::string> codecs;
  std::string rounding = "scalar";
  std::string out;
  bool as_json = false;
};

void run_table1_cmd(const Table1Args& a) {
  oq::SyntheticProbeConfig cfg = a.cfg;
  if (!a.codecs.empty()) cfg.codecs = parse_codecs(a.codecs);
  cfg.rounding = oq::parse_rounding(a.rounding);
  const std::vector<oq::MetricRow> rows = oq::run_table1(cfg);
  emit(a.as_json ? dump_json(table1_json(rows)) : oq::table1_csv(rows), a.out);
}

struct NeedleArgs {
  oq::NeedleConfig cfg;
  std::string codec = "octo";
  int bits = 2;
  std::string rounding = "local3x3";
  std::string out;
  bool as_json = false;
};

void run_needle_cmd(const NeedleArgs& a) {
  oq::NeedleConfig cfg = a.cfg;
  cfg.rounding = oq::parse_rounding(a.rounding);
  const oq::MetricRow row = oq::run_needle(cfg, oq::parse_codec_id(a.codec), a.bits);
  const std::vector<oq::MetricRow> rows{row};
  emit(a.as_json ? dump_json(needle_json(rows)) : oq::needle_csv(rows), a.out);
}

struct BitsplitArgs {
  oq::BitsplitConfig cfg;
  std::string out;
  bool as_json = false;
};

void run_bitsplit_cmd(const BitsplitArgs& a) {
  const std::vector<oq::SweepRow> rows = oq::run_bitsplit_sweep(a.cfg);
  emit(a.as_json ? dump_json(bitsplit_json(rows)) : oq::bitsplit_csv(rows), a.out);
}

struct RoundingArgs {
  oq::RoundingAblationConfig cfg;
  std::string out;
  bool as_json = false;
};

void run_rounding_cmd(const RoundingArgs& a) {
  const std::vector<oq::AblationRow> rows = oq::run_rounding_ablation(a.cfg);
  emit(a.as_json ? dump_json(rounding_json(rows)) : oq::rounding_csv(rows), a.out);
}

struct RoundtripArgs {
  std::string in;
  std::string out;
  int bits = 3;
  bool qjl = false;
  std::string rounding = "scalar";
  std::uint64_t seed = 0;
};

void run_roundtrip(const RoundtripArgs& a) {
  const std::vector<std::uint8_t> bytes = oq::read_file(a.in);
  const oq::Matrix keys = oq::matrix_from_bytes(bytes.data(), bytes.size());

  oq::CodecConfig cfg;
  cfg.dim = static_cast<std::uint32_t>(keys.cols);
  if (a.bits >= 2) {
    const auto [bd, bn] = oq::default_bit_split(a.bits);
    cfg.b_dir = static_cast<std::uint8_t>(bd);
    cfg.b_nrm = static_cast<std::uint8_t>(bn);
  } else {
    cfg.b_dir = 1;
    cfg.b_nrm = 1;
  }
  cfg.rounding = oq::parse_rounding(a.rounding);
  cfg.rotation_seed = a.seed;
  cfg.qjl = a.qjl;
  cfg.qjl_seed = oq::Stream(a.seed).child(1).seed();
  cfg.validate();

  oq::Encoder enc(cfg);
  oq::Matrix decoded(keys.rows, keys.cols);
  double cos_sum = 0.0;
  double se_sum = 0.0;
  for (std::size_t i = 0; i < keys.rows; ++i) {
    const oq::CompressedKey ck =
        enc.encode(std::span<const double>(keys.row(i), keys.cols));
    const std::vector<double> rec = enc.decode(ck);
    double dot = 0.0, nk = 0.0, nr = 0.0;
    for (std::size_t j = 0; j < keys.cols; ++j) {
      decoded.row(i)[j] = rec[j];
      const double e = rec[j] - keys.row(i)[j];
      se_sum += e * e;
      dot += keys.row(i)[j] * rec[j];
      nk += keys.row(i)[j] * keys.row(i)[j];
      nr += rec[j] * rec[j];
    }
    cos_sum += (nk > 0.0 && nr > 0.0) ? dot / std::sqrt(nk * nr) : 1.0;
  }
  oq::write_file(a.out, oq::matrix_to_bytes(decoded));

  const double cosine = cos_sum / static_cast<double>(keys.rows);
  const double mse = se_sum / static_cast<double>(keys.rows * keys.cols);
  std::printf("keys,dim,bits,b_dir,b_nrm,qjl,rounding,cosine,mse,eff_bits\n");
  std::printf("%zu,%zu,%d,%d,%d,%d,%s,%.6g,%.6g,%.6g\n", keys.rows, keys.cols, a.bits,
              static_cast<int>(cfg.b_dir), static_cast<int>(cfg.b_nrm), a.qjl ? 1 : 0,
              oq::rounding_name(cfg.rounding), cosine, mse,
              oq::effective_bits_per_coord(cfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"octoquant: rotation-preconditioned triplet quantization tools"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* tc = app.add_subcommand("train-codebooks", "Train and write codebook files");
  tc->add_option("--dim", train.dim, "Key dimension (power of two, >= 4)");
  tc->add_option("--bits", train.bits, "Codebook sizes in bits, comma separated")
      ->delimiter(',')
      ->required();
  tc->add_option("--out", train.out, "Output directory")->required();
  tc->callback([&train] { run_train(train); });

  CLI::App* bench = app.add_subcommand("bench", "Accuracy benchmarks");
  bench->require_subcommand(1);

  Table1Args t1;
  CLI::App* t1c = bench->add_subcommand("table1", "Synthetic rate-quality table");
  t1c->add_option("--dim", t1.cfg.dim, "Key dimension");
  t1c->add_option("--keys", t1.cfg.n_keys, "Keys per seed");
  t1c->add_option("--queries", t1.cfg.n_queries, "Queries per seed");
  t1c->add_option("--seeds", t1.cfg.n_seeds, "Number of seeds");
  t1c->add_option("--codecs", t1.codecs, "Codecs, comma separated")->delimiter(',');
  t1c->add_option("--bits", t1.cfg.bits, "Bit budgets, comma separated")->delimiter(',');
  t1c->add_option("--rounding", t1.rounding, "Triplet rounding mode");
  t1c->add_option("--threads", t1.cfg.threads, "Worker threads");
  t1c->add_option("--out", t1.out, "Write output here instead of stdout");
  t1c->add_flag("--json", t1.as_json, "Emit JSON instead of CSV");
  t1c->callback([&t1] { run_table1_cmd(t1); });

  NeedleArgs nd;
  CLI::App* ndc = bench->add_subcommand("needle", "Softmax needle retrieval");
  ndc->add_option("--dim", nd.cfg.dim, "Key dimension");
  ndc->add_option("--distractors", nd.cfg.distractors, "Distractor count");
  ndc->add_option("--noise", nd.cfg.noise_fraction, "Query noise fraction");
  ndc->add_option("--seeds", nd.cfg.n_seeds, "Number of seeds");
  ndc->add_option("--codec", nd.codec, "Codec to evaluate");
  ndc->add_option("--bits", nd.bits, "Bit budget");
  ndc->add_option("--rounding", nd.rounding, "Triplet rounding mode");
  ndc->add_option("--threads", nd.cfg.threads, "Worker threads");
  ndc->add_option("--out", nd.out, "Write output here instead of stdout");
  ndc->add_flag("--json", nd.as_json, "Emit JSON instead of CSV");
  ndc->callback([&nd] { run_needle_cmd(nd); });

  CLI::App* sweep = app.add_subcommand("sweep", "Parameter sweeps");
  sweep->require_subcommand(1);

  BitsplitArgs bs;
  CLI::App* bsc = sweep->add_subcommand("bitsplit", "Direction/norm bit split sweep");
  bsc->add_option("--dim", bs.cfg.dim, "Key dimension");
  bsc->add_option("--keys", bs.cfg.n_keys, "Keys per seed");
  bsc->add_option("--seeds", bs.cfg.n_seeds, "Number of seeds");
  bsc->add_option("--threads", bs.cfg.threads, "Worker threads");
  bsc->add_option("--out", bs.out, "Write output here instead of stdout");
  bsc->add_flag("--json", bs.as_json, "Emit JSON instead of CSV");
  bsc->callback([&bs] { run_bitsplit_cmd(bs); });

  RoundingArgs ra;
  CLI::App* rac = sweep->add_subcommand("rounding", "Triplet rounding mode ablation");
  rac->add_option("--dim", ra.cfg.dim, "Key dimension");
  rac->add_option("--keys", ra.cfg.n_keys, "Keys per seed");
  rac->add_option("--queries", ra.cfg.n_queries, "Queries per seed");
  rac->add_option("--seeds", ra.cfg.n_seeds, "Number of seeds");
  rac->add_option("--threads", ra.cfg.threads, "Worker threads");
  rac->add_option("--out", ra.out, "Write output here instead of stdout");
  rac->add_flag("--json", ra.as_json, "Emit JSON instead of CSV");
  rac->callback([&ra] { run_rounding_cmd(ra); });

  RoundtripArgs rt;
  CLI::App* rtc = app.add_subcommand("roundtrip", "Encode and decode one matrix file");
  rtc->add_option("--in", rt.in, "Input matrix file")->required();
  rtc->add_option("--out", rt.out, "Decoded matrix file")->required();
  rtc->add_option("--bits", rt.bits, "Bit budget per coordinate")->required();
  rtc->add_flag("--qjl", rt.qjl, "Attach the sign-sketch residual corrector");
  rtc->add_option("--rounding", rt.rounding, "Triplet rounding mode");
  rtc->add_option("--seed", rt.seed, "Rotation seed");
  rtc->callback([&rt] { run_roundtrip(rt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
