#include "expcli/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "ad/checkpoint.hpp"
#include "ad/optim.hpp"
#include "expcli/csv.hpp"
#include "expcli/svg.hpp"
#include "gnnbf/train.hpp"
#include "jscd/train.hpp"
#include "ssm/bench.hpp"
#include "wenv/oracle.hpp"

namespace expcli {

namespace fs = std::filesystem;

int thread_count() {
  const char* env = std::getenv("EXPCLI_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

namespace {

// Deterministic parallel map: results land by index regardless of scheduling.
template <class F>
void parallel_for(int64_t n, F&& fn) {
  int workers = std::min<int64_t>(thread_count(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm;
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path fresh_out_dir(const Config& cfg, const std::string& kind) {
  fs::path root = cfg.get_or("experiment", "output", "runs");
  fs::create_directories(root);
  std::string base = kind + "-" + cfg.hash() + "-" + timestamp();
  fs::path dir = root / base;
  for (int suffix = 2; fs::exists(dir); ++suffix)
    dir = root / (base + "-" + std::to_string(suffix));
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const Config& cfg, const std::string& kind,
                    double seconds) {
  std::ofstream os(dir / "manifest.txt");
  os << "kind: " << kind << "\n";
  os << "config_hash: " << cfg.hash() << "\n";
  os << "build: mambacomm (" << __DATE__ << ")\n";
  os << "wall_seconds: " << seconds << "\n";
  std::ofstream cfg_copy(dir / "config.ini");
  cfg_copy << cfg.canonical();
}

std::vector<wenv::ChannelRealization> channel_set(const wenv::NetworkConfig& net, int64_t n,
                                                  uint64_t base_seed) {
  std::vector<wenv::ChannelRealization> out;
  out.reserve(n);
  for (int64_t i = 0; i < n; ++i) out.push_back(wenv::sample_channel(net, base_seed + i));
  return out;
}

std::vector<double> oracle_ee_set(const std::vector<wenv::ChannelRealization>& hs,
                                  const wenv::NetworkConfig& net) {
  std::vector<double> ee(hs.size());
  parallel_for(static_cast<int64_t>(hs.size()),
               [&](int64_t i) { ee[i] = wenv::oracle_dinkelbach_wmmse(hs[i], net).ee; });
  return ee;
}

// --- beamforming -------------------------------------------------------------

void run_beamforming(const Config& cfg, const fs::path& dir) {
  wenv::NetworkConfig net;
  net.users = cfg.get_int("network", "users", 3);
  net.antennas = cfg.get_int("network", "antennas", 4);
  net.p_max = cfg.get_double("network", "p_max", 1.0);
  net.noise_power = cfg.get_double("network", "noise_power", 0.1);
  net.p_circuit = cfg.get_double("network", "p_circuit", 0.5);
  net.validate();

  uint64_t seed = cfg.get_int("experiment", "seed", 1);
  int64_t n_train = cfg.get_int("train", "train_size", 50000);
  int64_t n_val = cfg.get_int("train", "val_size", 5000);
  int64_t n_test = cfg.get_int("train", "test_size", 5000);

  auto train = channel_set(net, n_train, seed * 10000019ull + 1);
  auto val = channel_set(net, n_val, seed * 10000019ull + 2000000);
  auto test = channel_set(net, n_test, seed * 10000019ull + 4000000);
  wenv::save_channels((dir / "channels_test.bin").string(), test);

  auto stats = gnnbf::compute_feature_stats(train);
  auto val_oracle = oracle_ee_set(val, net);
  auto test_oracle = oracle_ee_set(test, net);
  double test_oracle_mean = 0;
  for (double v : test_oracle) test_oracle_mean += v;
  test_oracle_mean /= std::max<size_t>(1, test_oracle.size());

  gnnbf::TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("train", "epochs", 12));
  tc.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", 128));
  tc.lr = cfg.get_double("train", "lr", 2e-3);
  tc.patience = static_cast<int>(cfg.get_int("train", "patience", 5));
  tc.seed = seed + 77;

  int64_t layers = cfg.get_int("model", "layers", 4);
  auto variants = cfg.get_str_list("model", "variants", {"hybrid", "gat"});

  CsvWriter eval(dir / "eval.csv", {"variant", "test_mean_ee", "oracle_mean_ee", "ratio"});
  std::vector<gnnbf::BeamformerModel> trained;
  for (const auto& variant : variants) {
    gnnbf::HybridModelConfig mc = variant == "gat" ? gnnbf::HybridModelConfig::pure_gat(layers)
                                                   : gnnbf::HybridModelConfig::hybrid(layers);
    mc.width = cfg.get_int("model", "width", 64);
    mc.heads = cfg.get_int("model", "heads", 4);
    mc.edge_hidden = cfg.get_int("model", "edge_hidden", 128);
    gnnbf::BeamformerModel model;
    model.cfg = mc;
    model.net = net;
    model.stats = stats;
    ad::Rng rng(seed + (variant == "gat" ? 31 : 13));
    model.init(rng);

    auto result = gnnbf::train_beamformer(model, train, val, &val_oracle, tc);
    CsvWriter curve(dir / ("curve_" + variant + ".csv"),
                    {"epoch", "train_EE", "val_EE", "val_ratio_to_oracle"});
    for (const auto& st : result.curve)
      curve.row({CsvWriter::num(int64_t(st.epoch)), CsvWriter::num(st.train_ee),
                 CsvWriter::num(st.val_ee), CsvWriter::num(st.val_ratio)});

    double test_mean = gnnbf::evaluate_mean_ee(model, test);
    eval.row({variant, CsvWriter::num(test_mean), CsvWriter::num(test_oracle_mean),
              CsvWriter::num(test_mean / test_oracle_mean)});
    ad::save_checkpoint((dir / ("checkpoint_" + variant + ".bin")).string(), model.params);
    trained.push_back(std::move(model));
  }

  if (cfg.get_bool("bench", "enabled", false) && trained.size() >= 2) {
    auto Ks = cfg.get_int_list("bench", "users", {16, 32, 64, 128, 256});
    int repeats = static_cast<int>(cfg.get_int("bench", "repeats", 9));
    gnnbf::BeamformerModel* gat = nullptr;
    gnnbf::BeamformerModel* hyb = nullptr;
    for (size_t i = 0; i < variants.size(); ++i) {
      if (variants[i] == "gat") gat = &trained[i];
      if (variants[i] == "hybrid") hyb = &trained[i];
    }
    if (gat && hyb) {
      auto rows = gnnbf::benchmark_inference(*gat, *hyb, Ks, repeats);
      CsvWriter lat(dir / "latency.csv", {"model", "K", "median_us", "p90_us"});
      for (const auto& r : rows)
        lat.row({r.model, CsvWriter::num(r.K), CsvWriter::num(r.median_us),
                 CsvWriter::num(r.p90_us)});
    }
  }
}

// --- jscd --------------------------------------------------------------------

void run_jscd(const Config& cfg, const fs::path& dir) {
  uint64_t seed = cfg.get_int("experiment", "seed", 1);
  int64_t n_train = cfg.get_int("jscd", "train_sentences", 20000);
  int64_t n_val = cfg.get_int("jscd", "val_sentences", 2000);
  int64_t n_test = cfg.get_int("jscd", "test_sentences", 2000);
  uint64_t corpus_seed = cfg.get_int("jscd", "corpus_seed", 42);

  std::vector<std::string> train, val, test;
  if (cfg.has("jscd", "corpus_path")) {
    auto all = jscd::load_corpus(cfg.get("jscd", "corpus_path"));
    if (static_cast<int64_t>(all.size()) < n_train + n_val + n_test)
      throw ExperimentError("corpus file too small for the configured split");
    train.assign(all.begin(), all.begin() + n_train);
    val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
    test.assign(all.begin() + n_train + n_val, all.begin() + n_train + n_val + n_test);
  } else {
    auto all = jscd::generate_corpus(n_train + n_val + n_test, corpus_seed);
    train.assign(all.begin(), all.begin() + n_train);
    val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
    test.assign(all.begin() + n_train + n_val, all.end());
  }
  jscd::save_corpus((dir / "corpus_train.txt").string(), train);
  jscd::save_corpus((dir / "corpus_test.txt").string(), test);

  jscd::Vocab vocab = jscd::Vocab::build(train, cfg.get_int("jscd", "min_freq", 1));

  jscd::JscdTrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("jscd", "epochs", 10));
  tc.batch_size = static_cast<int>(cfg.get_int("jscd", "batch_size", 64));
  tc.lr = cfg.get_double("jscd", "lr", 2e-3);
  tc.snr_lo_db = cfg.get_double("jscd", "snr_train_lo", 0.0);
  tc.snr_hi_db = cfg.get_double("jscd", "snr_train_hi", 18.0);
  tc.patience = static_cast<int>(cfg.get_int("jscd", "patience", 3));
  tc.seed = seed + 11;

  auto snrs = cfg.get_double_list("jscd", "snr_eval", {0, 3, 6, 9, 12, 15, 18});
  int64_t eval_n = cfg.get_int("jscd", "eval_sentences", 300);
  std::vector<std::string> eval_set(test.begin(),
                                    test.begin() + std::min<int64_t>(eval_n, test.size()));
  auto variants = cfg.get_str_list("jscd", "variants", {"baseline", "mamba"});

  CsvWriter bleu(dir / "bleu.csv",
                 {"variant", "snr_db", "bleu", "bp", "p1", "p2", "p3", "p4"});
  for (const auto& variant : variants) {
    jscd::JscdModel model;
    model.cfg.vocab = vocab.size();
    model.cfg.width = cfg.get_int("jscd", "width", 128);
    model.cfg.heads = cfg.get_int("jscd", "heads", 4);
    model.cfg.enc_layers = cfg.get_int("jscd", "enc_layers", 2);
    model.cfg.dec_layers = cfg.get_int("jscd", "dec_layers", 2);
    model.cfg.channel_dim = cfg.get_int("jscd", "channel_dim", 16);
    model.cfg.tx_mamba = model.cfg.rx_mamba = variant == "mamba";
    ad::Rng rng(seed + 101);
    model.init(rng);

    auto result = jscd::train_jscd(model, train, val, vocab, tc);
    CsvWriter curve(dir / ("curve_" + variant + ".csv"),
                    {"epoch", "train_loss", "val_token_acc"});
    for (const auto& st : result.curve)
      curve.row({CsvWriter::num(int64_t(st.epoch)), CsvWriter::num(st.train_loss),
                 CsvWriter::num(st.val_token_acc)});

    auto rows = jscd::evaluate_over_snr(model, eval_set, vocab, snrs, seed + 991, variant);
    for (const auto& r : rows)
      bleu.row({r.variant, CsvWriter::num(r.snr_db), CsvWriter::num(r.bleu.bleu),
                CsvWriter::num(r.bleu.brevity_penalty), CsvWriter::num(r.bleu.precisions[0]),
                CsvWriter::num(r.bleu.precisions[1]), CsvWriter::num(r.bleu.precisions[2]),
                CsvWriter::num(r.bleu.precisions[3])});
    ad::save_checkpoint((dir / ("checkpoint_" + variant + ".bin")).string(), model.params);
  }
}

// --- scan bench ----------------------------------------------------------------

void run_scan_bench(const Config& cfg, const fs::path& dir) {
  auto lengths = cfg.get_int_list("scan", "lengths", {256, 512, 1024, 2048, 4096, 8192});
  int64_t D = cfg.get_int("scan", "d_model", 16);
  int64_t N = cfg.get_int("scan", "d_state", 16);
  int repeats = static_cast<int>(cfg.get_int("scan", "repeats", 7));
  uint64_t seed = cfg.get_int("experiment", "seed", 1);
  auto rows = ssm::benchmark_scan(lengths, D, N, repeats, seed);
  CsvWriter csv(dir / "scanbench.csv", {"impl", "L", "D", "N", "median_us", "p90_us"});
  for (const auto& r : rows)
    csv.row({r.impl, CsvWriter::num(r.L), CsvWriter::num(r.D), CsvWriter::num(r.N),
             CsvWriter::num(r.median_us), CsvWriter::num(r.p90_us)});
}

// --- plotting -----------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ExperimentError("missing table: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

PlotSpec series_by_first_column(const std::vector<std::vector<std::string>>& rows, int xcol,
                                int ycol) {
  PlotSpec spec;
  std::map<std::string, Series> by_label;
  std::vector<std::string> order;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!by_label.count(r[0])) {
      by_label[r[0]].label = r[0];
      order.push_back(r[0]);
    }
    by_label[r[0]].x.push_back(std::stod(r[xcol]));
    by_label[r[0]].y.push_back(std::stod(r[ycol]));
  }
  for (const auto& label : order) spec.series.push_back(by_label[label]);
  return spec;
}

}  // namespace

RunResult run_experiment(const Config& cfg) {
  std::string kind = cfg.get("experiment", "kind");
  if (kind != "beamforming" && kind != "jscd" && kind != "scan-bench")
    throw ConfigParseError("unknown experiment kind: " + kind);
  fs::path dir = fresh_out_dir(cfg, kind);
  auto t0 = std::chrono::steady_clock::now();
  try {
    if (kind == "beamforming")
      run_beamforming(cfg, dir);
    else if (kind == "jscd")
      run_jscd(cfg, dir);
    else
      run_scan_bench(cfg, dir);
  } catch (const std::exception& e) {
    // keep partial artifacts for inspection
    std::ofstream fail(dir / "FAILED.txt");
    fail << e.what() << "\n";
    throw ExperimentError("experiment failed (partial artifacts in " + dir.string() +
                          "): " + e.what());
  }
  auto t1 = std::chrono::steady_clock::now();
  write_manifest(dir, cfg, kind, std::chrono::duration<double>(t1 - t0).count());
  return {dir.string()};
}

std::string make_plot(const std::string& report_dir, const std::string& kind) {
  fs::path dir(report_dir);
  PlotSpec spec;
  std::string out;
  if (kind == "latency") {
    auto rows = read_csv(dir / "latency.csv");
    if (rows.size() < 2) throw ExperimentError("empty table: latency.csv");
    spec = series_by_first_column(rows, 1, 2);
    spec.title = "Inference latency vs user count";
    spec.x_label = "users (K)";
    spec.y_label = "median latency (us)";
    spec.log_x = spec.log_y = true;
    out = (dir / "latency.svg").string();
  } else if (kind == "bleu") {
    auto rows = read_csv(dir / "bleu.csv");
    if (rows.size() < 2) throw ExperimentError("empty table: bleu.csv");
    spec = series_by_first_column(rows, 1, 2);
    spec.title = "BLEU vs channel SNR";
    spec.x_label = "SNR (dB)";
    spec.y_label = "corpus BLEU";
    out = (dir / "bleu.svg").string();
  } else if (kind == "scanbench") {
    auto rows = read_csv(dir / "scanbench.csv");
    if (rows.size() < 2) throw ExperimentError("empty table: scanbench.csv");
    spec = series_by_first_column(rows, 1, 4);
    spec.title = "Sequence-layer latency vs length";
    spec.x_label = "sequence length (L)";
    spec.y_label = "median latency (us)";
    spec.log_x = spec.log_y = true;
    out = (dir / "scanbench.svg").string();
  } else if (kind == "training") {
    spec.title = "Validation metric per epoch";
    spec.x_label = "epoch";
    spec.y_label = "validation metric";
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::string name = entry.path().filename().string();
      if (name.rfind("curve_", 0) != 0 || entry.path().extension() != ".csv") continue;
      auto rows = read_csv(entry.path());
      Series s;
      s.label = name.substr(6, name.size() - 10);
      for (size_t i = 1; i < rows.size(); ++i) {
        s.x.push_back(std::stod(rows[i][0]));
        s.y.push_back(std::stod(rows[i][2]));
      }
      if (!s.x.empty()) spec.series.push_back(std::move(s));
    }
    if (spec.series.empty()) throw ExperimentError("missing table: curve_*.csv");
    out = (dir / "training.svg").string();
  } else {
    throw ExperimentError("unknown figure kind: " + kind);
  }
  write_svg(out, spec);
  return out;
}

// --- selftest ------------------------------------------------------------------

namespace {

bool check_scan_equivalence() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> upos(0.05, 1.5);
  std::normal_distribution<double> g(0, 1);
  for (int64_t L : {1, 2, 7, 33, 257}) {
    int64_t D = 3, N = 4;
    std::vector<double> a(D * N), dt(L * D), b(L * N), c(L * N), x(L * D);
    for (auto& v : a) v = -upos(rng);
    for (auto& v : dt) v = upos(rng);
    for (auto& v : b) v = g(rng);
    for (auto& v : c) v = g(rng);
    for (auto& v : x) v = g(rng);
    auto in = ssm::make_scan_inputs(a, dt, b, c, x, L, D, N);
    auto rs = ssm::scan_sequential(in, ssm::ScanState::zero(D, N));
    auto rp = ssm::scan_parallel(in, ssm::ScanState::zero(D, N));
    for (size_t i = 0; i < rs.y.size(); ++i) {
      double denom = std::max({std::abs(rs.y[i]), std::abs(rp.y[i]), 1e-30});
      if (std::abs(rs.y[i] - rp.y[i]) / denom > 1e-10) return false;
    }
  }
  return true;
}

bool check_selectivity() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> upos(0.05, 1.5);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    int64_t L = 1 + rng() % 30, D = 2, N = 3;
    std::vector<double> a(D * N), dt(L * D), b(L * N), c(L * N), x(L * D);
    for (auto& v : a) v = -upos(rng);
    for (auto& v : dt) v = upos(rng);
    for (auto& v : b) v = g(rng);
    for (auto& v : c) v = g(rng);
    for (auto& v : x) v = g(rng);
    auto in = ssm::make_scan_inputs(a, dt, b, c, x, L, D, N);
    auto base = ssm::scan_sequential(in, ssm::ScanState::zero(D, N));
    auto nulled = ssm::insert_null_step(in, rng() % (L + 1));
    auto r = ssm::scan_sequential(nulled, ssm::ScanState::zero(D, N));
    for (size_t i = 0; i < base.final_state.h.size(); ++i)
      if (std::abs(base.final_state.h[i] - r.final_state.h[i]) > 1e-12) return false;
  }
  return true;
}

bool check_gradient_spot() {
  ad::Rng rng(3);
  ad::Tensor x0 = ad::randn(rng, {4, 4});
  ad::Tensor w0 = ad::randn(rng, {4, 4});
  ad::Tape tape;
  ad::Tensor x = tape.leaf(x0);
  ad::Tensor loss =
      ad::reduce_sum(&tape, ad::silu(&tape, ad::matmul(&tape, x, tape.leaf(w0))));
  auto grads = tape.backward(loss);
  const ad::Tensor& g = grads.at(x.node());
  double h = 1e-5;
  for (int64_t i = 0; i < x0.size(); ++i) {
    ad::Tensor xp = x0.clone();
    xp.data()[i] += h;
    double fp = ad::reduce_sum(nullptr, ad::silu(nullptr, ad::matmul(nullptr, xp, w0))).item();
    xp.data()[i] -= 2 * h;
    double fm = ad::reduce_sum(nullptr, ad::silu(nullptr, ad::matmul(nullptr, xp, w0))).item();
    double fd = (fp - fm) / (2 * h);
    double denom = std::max({std::abs(fd), std::abs(g.data()[i]), 1e-12});
    if (std::abs(fd - g.data()[i]) / denom > 1e-4) return false;
  }
  return true;
}

bool check_bleu() {
  std::vector<std::vector<int32_t>> c = {{1, 1, 1, 1, 1, 1, 1}};
  std::vector<std::vector<int32_t>> r = {{1, 2, 3, 4, 1, 5}};
  auto rep = jscd::corpus_bleu(c, r);
  if (std::abs(rep.precisions[0] - 2.0 / 7.0) > 1e-12) return false;
  auto perfect = jscd::corpus_bleu(r, r);
  return std::abs(perfect.bleu - 1.0) < 1e-12;
}

bool check_ee() {
  wenv::NetworkConfig net;
  net.users = 1;
  net.antennas = 4;
  auto h = wenv::sample_channel(net, 5);
  auto w = wenv::mrt_equal_power(h, net);
  auto r = wenv::energy_efficiency(h, w, net);
  double expect = std::log2(1.0 + net.p_max * h.norm_sq(0) / net.noise_power) /
                  (net.p_max + net.p_circuit);
  return std::abs(r.ee - expect) < 1e-9;
}

bool check_checkpoint() {
  ad::Rng rng(6);
  ad::ParamStore ps;
  ps["t/w"] = ad::randn(rng, {3, 3});
  auto path = fs::temp_directory_path() / "expcli_selftest_ckpt.bin";
  ad::save_checkpoint(path.string(), ps);
  ad::ParamStore back;
  ad::load_checkpoint(path.string(), back);
  fs::remove(path);
  if (!back.contains("t/w")) return false;
  for (int64_t i = 0; i < 9; ++i)
    if (back.at("t/w").data()[i] != ps.at("t/w").data()[i]) return false;
  return true;
}

}  // namespace

int selftest() {
  struct Check {
    const char* name;
    bool (*fn)();
  };
  const Check checks[] = {
      {"scan-equivalence", check_scan_equivalence}, {"selectivity", check_selectivity},
      {"gradient-spot", check_gradient_spot},       {"bleu-oracle", check_bleu},
      {"ee-closed-form", check_ee},                 {"checkpoint-roundtrip", check_checkpoint},
  };
  int failures = 0;
  for (const auto& c : checks) {
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("selftest %-22s FAIL (%s)\n", c.name, e.what());
      ++failures;
      continue;
    }
    std::printf("selftest %-22s %s\n", c.name, ok ? "PASS" : "FAIL");
    failures += !ok;
  }
  return failures;
}

}  // namespace expcli
