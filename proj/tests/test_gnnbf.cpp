#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ad/optim.hpp"
#include "fdcheck.hpp"
#include "gnnbf/graph.hpp"
#include "gnnbf/model.hpp"
#include "gnnbf/train.hpp"
#include "wenv/oracle.hpp"

using namespace gnnbf;
using ad::Tensor;

TEST_SUITE_BEGIN("gnnbf");

namespace {

std::vector<wenv::ChannelRealization> sample_set(const wenv::NetworkConfig& net, int n,
                                                 uint64_t seed0) {
  std::vector<wenv::ChannelRealization> out;
  for (int i = 0; i < n; ++i) out.push_back(wenv::sample_channel(net, seed0 + i));
  return out;
}

wenv::ChannelRealization permute_users(const wenv::ChannelRealization& h,
                                       const std::vector<int64_t>& perm) {
  wenv::ChannelRealization out = h;
  for (int64_t k = 0; k < h.K; ++k)
    for (int64_t a = 0; a < h.Nt; ++a) {
      out.re[k * h.Nt + a] = h.re[perm[k] * h.Nt + a];
      out.im[k * h.Nt + a] = h.im[perm[k] * h.Nt + a];
    }
  return out;
}

BeamformerModel make_model(const wenv::NetworkConfig& net, const HybridModelConfig& cfg,
                           const FeatureStats& stats, uint64_t seed) {
  BeamformerModel m;
  m.cfg = cfg;
  m.net = net;
  m.stats = stats;
  ad::Rng rng(seed);
  m.init(rng);
  return m;
}

}  // namespace

TEST_CASE("build_graph: shapes, permutation consistency, standardization") {
  wenv::NetworkConfig net;
  net.users = 2;
  net.antennas = 4;
  auto train = sample_set(net, 400, 100);
  auto stats = compute_feature_stats(train);

  auto g = build_graph(train[0], &stats);
  CHECK(g.node_feats.size() == 2 * 2 * 4);
  CHECK(g.edge_feats.size() == 2 * 2 * 4);

  // permuting users permutes node features identically
  auto hp = permute_users(train[0], {1, 0});
  auto gp = build_graph(hp, &stats);
  for (int64_t d = 0; d < 8; ++d) {
    CHECK(gp.node_feats[0 * 8 + d] == g.node_feats[1 * 8 + d]);
    CHECK(gp.node_feats[1 * 8 + d] == g.node_feats[0 * 8 + d]);
  }

  // standardized features have mean ~0, var ~1 per dim over the training set
  const int64_t nd = 8;
  std::vector<double> mean(nd, 0), var(nd, 0);
  int64_t rows = 0;
  for (const auto& h : train) {
    auto gg = build_graph(h, &stats);
    for (int64_t k = 0; k < h.K; ++k, ++rows)
      for (int64_t d = 0; d < nd; ++d) mean[d] += gg.node_feats[k * nd + d];
  }
  for (auto& v : mean) v /= rows;
  for (const auto& h : train) {
    auto gg = build_graph(h, &stats);
    for (int64_t k = 0; k < h.K; ++k)
      for (int64_t d = 0; d < nd; ++d) {
        double c = gg.node_feats[k * nd + d] - mean[d];
        var[d] += c * c;
      }
  }
  for (int64_t d = 0; d < nd; ++d) {
    CHECK(std::abs(mean[d]) < 0.05);
    CHECK(var[d] / (rows - 1) == doctest::Approx(1.0).epsilon(0.05));
  }

  // serialization order is descending channel norm
  for (size_t i = 1; i < g.order.size(); ++i)
    CHECK(train[0].norm_sq(g.order[i - 1]) >= train[0].norm_sq(g.order[i]));
}

TEST_CASE("batch EE matches the reference evaluator") {
  wenv::NetworkConfig net;
  net.users = 3;
  net.antennas = 4;
  auto hs = sample_set(net, 6, 500);
  auto stats = compute_feature_stats(hs);
  GraphBatch b = make_graph_batch(hs, stats);
  // arbitrary feasible beamformers
  ad::Rng rng(7);
  Tensor w = ad::randn(rng, {b.B, b.K, 2 * b.Nt}, 0.2);
  {
    double total = 0;
    for (int64_t i = 0; i < w.size(); ++i) total += w.data()[i] * w.data()[i];
    // keep within budget across every sample by a crude global bound
    double scale = std::sqrt(net.p_max / (total + 1.0));
    for (int64_t i = 0; i < w.size(); ++i) w.data()[i] *= scale;
  }
  Tensor ee = batch_ee(nullptr, b, w, net);
  for (int64_t i = 0; i < b.B; ++i) {
    wenv::BeamformingDecision d;
    d.K = b.K;
    d.Nt = b.Nt;
    d.re.resize(b.K * b.Nt);
    d.im.resize(b.K * b.Nt);
    for (int64_t k = 0; k < b.K; ++k)
      for (int64_t a = 0; a < b.Nt; ++a) {
        d.re[k * b.Nt + a] = w.at({i, k, a});
        d.im[k * b.Nt + a] = w.at({i, k, b.Nt + a});
      }
    auto ref = wenv::energy_efficiency(hs[i], d, net);
    CHECK(ee.at({i, 0}) == doctest::Approx(ref.ee).epsilon(1e-12));
  }
}

TEST_CASE("gat layer: degenerate K=1, symmetry, permutation equivariance") {
  wenv::NetworkConfig net;
  net.users = 4;
  net.antennas = 4;
  auto hs = sample_set(net, 32, 900);
  auto stats = compute_feature_stats(hs);
  HybridModelConfig cfg = HybridModelConfig::pure_gat(1);
  cfg.width = 32;
  cfg.heads = 4;
  cfg.edge_hidden = 16;
  auto model = make_model(net, cfg, stats, 3);

  // K=1: self-attention only, finite output
  {
    wenv::NetworkConfig n1 = net;
    n1.users = 1;
    auto h1 = wenv::sample_channel(n1, 42);
    GraphBatch b = make_graph_batch({h1}, stats);
    ad::Rng rng(4);
    Tensor feats = ad::randn(rng, {1, 1, cfg.width});
    ad::Tape scratch;
    ad::Bound bound(scratch, model.params);
    Tensor y = gat_layer(nullptr, bound, "gnn/layer0/", feats, b.edge_feats, cfg);
    CHECK(y.shape() == feats.shape());
    CHECK(ad::all_finite(y));
  }

  // identical node features -> identical outputs (edges of an identical-user graph)
  {
    wenv::ChannelRealization same;
    same.K = 4;
    same.Nt = 4;
    same.re.resize(16);
    same.im.resize(16);
    auto base = wenv::sample_channel(net, 77);
    for (int64_t k = 0; k < 4; ++k)
      for (int64_t a = 0; a < 4; ++a) {
        same.re[k * 4 + a] = base.re[a];
        same.im[k * 4 + a] = base.im[a];
      }
    GraphBatch b = make_graph_batch({same}, stats);
    Tensor feats = Tensor::zeros({1, 4, cfg.width});
    for (int64_t k = 0; k < 4; ++k)
      for (int64_t d = 0; d < cfg.width; ++d) feats.at({0, k, d}) = 0.1 * d;
    ad::Tape scratch;
    ad::Bound bound(scratch, model.params);
    Tensor y = gat_layer(nullptr, bound, "gnn/layer0/", feats, b.edge_feats, cfg);
    for (int64_t k = 1; k < 4; ++k)
      for (int64_t d = 0; d < cfg.width; ++d)
        CHECK(y.at({0, k, d}) == doctest::Approx(y.at({0, 0, d})).epsilon(1e-12));
  }

  // permutation equivariance with real edge features
  {
    auto h = hs[0];
    std::vector<int64_t> perm = {2, 0, 3, 1};
    auto hp = permute_users(h, perm);
    GraphBatch b = make_graph_batch({h}, stats);
    GraphBatch bp = make_graph_batch({hp}, stats);
    ad::Rng rng(5);
    Tensor feats = ad::randn(rng, {1, 4, cfg.width});
    Tensor featsp = Tensor::zeros({1, 4, cfg.width});
    for (int64_t k = 0; k < 4; ++k)
      for (int64_t d = 0; d < cfg.width; ++d) featsp.at({0, k, d}) = feats.at({0, perm[k], d});
    ad::Tape s1, s2;
    ad::Bound b1(s1, model.params), b2(s2, model.params);
    Tensor y = gat_layer(nullptr, b1, "gnn/layer0/", feats, b.edge_feats, cfg);
    Tensor yp = gat_layer(nullptr, b2, "gnn/layer0/", featsp, bp.edge_feats, cfg);
    for (int64_t k = 0; k < 4; ++k)
      for (int64_t d = 0; d < cfg.width; ++d)
        CHECK(yp.at({0, k, d}) == doctest::Approx(y.at({0, perm[k], d})).epsilon(1e-9));
  }
}

TEST_CASE("mamba graph layer: K=1 equals the plain block; reversal symmetry; identity") {
  wenv::NetworkConfig net;
  net.users = 5;
  net.antennas = 4;
  auto hs = sample_set(net, 16, 1500);
  auto stats = compute_feature_stats(hs);
  HybridModelConfig cfg = HybridModelConfig::hybrid(1);  // single mamba layer
  cfg.width = 24;
  auto model = make_model(net, cfg, stats, 8);
  const std::string lp = "gnn/layer0/";

  {
    wenv::NetworkConfig n1 = net;
    n1.users = 1;
    auto h1 = wenv::sample_channel(n1, 3);
    GraphBatch b = make_graph_batch({h1}, stats);
    ad::Rng rng(6);
    Tensor feats = ad::randn(rng, {1, 1, cfg.width});
    ad::Tape s1, s2;
    ad::Bound b1(s1, model.params), b2(s2, model.params);
    Tensor y = mamba_graph_layer(nullptr, b1, lp, feats, b, cfg);
    Tensor yb = ssm::mamba_block_forward(nullptr, b2, lp + "mamba/", feats, cfg.mamba_cfg());
    for (int64_t i = 0; i < y.size(); ++i)
      CHECK(y.data()[i] == doctest::Approx(yb.data()[i]).epsilon(1e-12));
  }

  // reversing the input node order and reversing the output equals the original
  {
    auto h = hs[0];
    std::vector<int64_t> rev = {4, 3, 2, 1, 0};
    auto hr = permute_users(h, rev);
    GraphBatch b = make_graph_batch({h}, stats);
    GraphBatch br = make_graph_batch({hr}, stats);
    ad::Rng rng(7);
    Tensor feats = ad::randn(rng, {1, 5, cfg.width});
    Tensor featsr = Tensor::zeros({1, 5, cfg.width});
    for (int64_t k = 0; k < 5; ++k)
      for (int64_t d = 0; d < cfg.width; ++d) featsr.at({0, k, d}) = feats.at({0, rev[k], d});
    ad::Tape s1, s2;
    ad::Bound b1(s1, model.params), b2(s2, model.params);
    Tensor y = mamba_graph_layer(nullptr, b1, lp, feats, b, cfg);
    Tensor yr = mamba_graph_layer(nullptr, b2, lp, featsr, br, cfg);
    for (int64_t k = 0; k < 5; ++k)
      for (int64_t d = 0; d < cfg.width; ++d)
        CHECK(yr.at({0, k, d}) == doctest::Approx(y.at({0, rev[k], d})).epsilon(1e-9));
  }

  // zero output projection -> identity layer
  {
    model.params[lp + "mamba/out_proj"] =
        Tensor::zeros({cfg.mamba_cfg().d_inner(), cfg.width});
    GraphBatch b = make_graph_batch({hs[1]}, stats);
    ad::Rng rng(8);
    Tensor feats = ad::randn(rng, {1, 5, cfg.width});
    ad::Tape s1;
    ad::Bound b1(s1, model.params);
    Tensor y = mamba_graph_layer(nullptr, b1, lp, feats, b, cfg);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == feats.data()[i]);
  }
}

TEST_CASE("decode is always feasible and saturates at the full budget") {
  wenv::NetworkConfig net;
  net.users = 3;
  net.antennas = 4;
  auto hs = sample_set(net, 8, 2100);
  auto stats = compute_feature_stats(hs);
  HybridModelConfig cfg = HybridModelConfig::pure_gat(1);
  cfg.width = 16;
  auto model = make_model(net, cfg, stats, 9);
  ad::Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor feats = ad::randn(rng, {2, 3, cfg.width}, 3.0);
    ad::Tape scratch;
    ad::Bound bound(scratch, model.params);
    Tensor w = decode_beamformers(nullptr, bound, "gnn/", feats, net, cfg);
    for (int64_t i = 0; i < 2; ++i) {
      double p = 0;
      for (int64_t k = 0; k < 3; ++k)
        for (int64_t d = 0; d < 8; ++d) p += w.at({i, k, d}) * w.at({i, k, d});
      CHECK(p <= net.p_max + 1e-9);
    }
  }
  // a saturated pool gate uses the full budget
  model.params["gnn/pool_b"] = Tensor::full({1}, 50.0);
  Tensor feats = ad::randn(rng, {1, 3, cfg.width});
  ad::Tape scratch;
  ad::Bound bound(scratch, model.params);
  Tensor w = decode_beamformers(nullptr, bound, "gnn/", feats, net, cfg);
  double p = 0;
  for (int64_t i = 0; i < w.size(); ++i) p += w.data()[i] * w.data()[i];
  CHECK(p == doctest::Approx(net.p_max).epsilon(1e-9));
}

TEST_CASE("EE gradient w.r.t. decoder head passes finite differences") {
  wenv::NetworkConfig net;
  net.users = 2;
  net.antennas = 3;
  auto hs = sample_set(net, 3, 2500);
  auto stats = compute_feature_stats(hs);
  HybridModelConfig cfg = HybridModelConfig::pure_gat(1);
  cfg.width = 8;
  cfg.heads = 2;
  cfg.edge_hidden = 8;
  auto model = make_model(net, cfg, stats, 11);
  GraphBatch b = make_graph_batch(hs, stats);

  ad::Tape tape;
  ad::Bound bound(tape, model.params);
  Tensor w = model_forward(&tape, bound, model, b);
  Tensor loss = ad::neg(&tape, ad::reduce_mean(&tape, batch_ee(&tape, b, w, net)));
  auto grads = tape.backward(loss);
  auto by_name = bound.grads_by_name(grads);

  for (const std::string name : {"gnn/head_w", "gnn/pool_w", "gnn/layer0/wq"}) {
    const Tensor& g = by_name.at(name);
    Tensor saved = model.params.at(name).clone();
    auto f = [&](const Tensor& v) {
      model.params[name] = v;
      ad::Tape scratch;
      ad::Bound b2(scratch, model.params);
      Tensor wv = model_forward(nullptr, b2, model, b);
      double r = -ad::reduce_mean(nullptr, batch_ee(nullptr, b, wv, net)).item();
      return r;
    };
    auto cmp = fd::compare(std::vector<double>(g.data(), g.data() + g.size()),
                           fd::central_diff(f, saved, 1e-5));
    model.params[name] = saved;
    CHECK_MESSAGE(cmp.ok(), name, " worst rel ", cmp.worst_rel);
  }
}

TEST_CASE("pure-GAT model is permutation-equivariant end to end") {
  wenv::NetworkConfig net;
  net.users = 4;
  net.antennas = 4;
  auto hs = sample_set(net, 64, 3000);
  auto stats = compute_feature_stats(hs);
  HybridModelConfig cfg = HybridModelConfig::pure_gat(2);
  cfg.width = 32;
  auto model = make_model(net, cfg, stats, 12);

  auto h = hs[0];
  std::vector<int64_t> perm = {3, 1, 0, 2};
  auto hp = permute_users(h, perm);
  GraphBatch b = make_graph_batch({h}, stats);
  GraphBatch bp = make_graph_batch({hp}, stats);
  ad::Tape s1, s2;
  ad::Bound b1(s1, model.params), b2(s2, model.params);
  Tensor w = model_forward(nullptr, b1, model, b);
  Tensor wp = model_forward(nullptr, b2, model, bp);
  for (int64_t k = 0; k < 4; ++k)
    for (int64_t d = 0; d < 8; ++d)
      CHECK(wp.at({0, k, d}) == doctest::Approx(w.at({0, perm[k], d})).epsilon(1e-9));
}

TEST_CASE("layer op counts: attention quadratic in K, mamba linear") {
  wenv::NetworkConfig net;
  net.antennas = 4;
  HybridModelConfig cfg = HybridModelConfig::hybrid(2);  // layer0 mamba, layer1 attention
  cfg.width = 32;
  auto stats_src = sample_set(net, 16, 4000);
  auto stats = compute_feature_stats(stats_src);
  auto model = make_model(net, cfg, stats, 13);

  auto flops_for = [&](LayerKind kind, int64_t K) {
    wenv::NetworkConfig n = net;
    n.users = K;
    auto h = wenv::sample_channel(n, 60 + K);
    GraphBatch b = make_graph_batch({h}, stats);
    ad::Rng rng(14);
    Tensor feats = ad::randn(rng, {1, K, cfg.width});
    ad::Tape scratch;
    ad::Bound bound(scratch, model.params);
    ad::FlopCount::Guard guard;
    if (kind == LayerKind::Attention)
      gat_layer(nullptr, bound, "gnn/layer1/", feats, b.edge_feats, cfg);
    else
      mamba_graph_layer(nullptr, bound, "gnn/layer0/", feats, b, cfg);
    return ad::FlopCount::count;
  };

  // quadrupling K: quadratic term must push attention growth well past linear
  double gat_growth = double(flops_for(LayerKind::Attention, 64)) /
                      double(flops_for(LayerKind::Attention, 16));
  double mamba_growth =
      double(flops_for(LayerKind::Mamba, 64)) / double(flops_for(LayerKind::Mamba, 16));
  CHECK(gat_growth > 8.0);     // >> 4x
  CHECK(mamba_growth < 5.0);   // ~4x
  CHECK(mamba_growth > 3.5);
}

TEST_CASE("tiny training run raises validation EE above the untrained model") {
  wenv::NetworkConfig net;
  net.users = 2;
  net.antennas = 4;
  auto train = sample_set(net, 256, 5000);
  auto val = sample_set(net, 64, 9000);
  auto stats = compute_feature_stats(train);
  HybridModelConfig cfg = HybridModelConfig::hybrid(2);
  cfg.width = 24;
  cfg.edge_hidden = 16;
  auto model = make_model(net, cfg, stats, 15);

  double before = evaluate_mean_ee(model, val);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 64;
  tc.lr = 3e-3;
  tc.seed = 16;
  auto result = train_beamformer(model, train, val, nullptr, tc);
  CHECK(result.curve.size() >= 1);
  for (const auto& st : result.curve) {
    CHECK(std::isfinite(st.train_ee));
    CHECK(std::isfinite(st.val_ee));
  }
  double after = evaluate_mean_ee(model, val);
  CHECK(after > before);
}

TEST_CASE("benchmark_inference: single-K list gives one row set") {
  wenv::NetworkConfig net;
  net.users = 3;
  net.antennas = 4;
  auto hs = sample_set(net, 8, 6000);
  auto stats = compute_feature_stats(hs);
  auto cfg_gat = HybridModelConfig::pure_gat(2);
  cfg_gat.width = 16;
  cfg_gat.edge_hidden = 8;
  auto cfg_h = HybridModelConfig::hybrid(2);
  cfg_h.width = 16;
  cfg_h.edge_hidden = 8;
  auto gat = make_model(net, cfg_gat, stats, 17);
  auto hyb = make_model(net, cfg_h, stats, 18);
  auto rows = benchmark_inference(gat, hyb, {8}, 3);
  CHECK(rows.size() == 4);  // gat, hybrid, gat-layer, mamba-layer
  for (const auto& r : rows) CHECK(r.median_us > 0);
  CHECK_THROWS_AS(benchmark_inference(gat, hyb, {8}, 0), std::invalid_argument);
}

TEST_SUITE_END();
