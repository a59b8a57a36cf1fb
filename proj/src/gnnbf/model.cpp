#include "gnnbf/model.hpp"

#include <cmath>

namespace gnnbf {

using ad::Tensor;

HybridModelConfig HybridModelConfig::pure_gat(int64_t layers) {
  HybridModelConfig c;
  c.layout.assign(layers, LayerKind::Attention);
  return c;
}

HybridModelConfig HybridModelConfig::hybrid(int64_t layers) {
  HybridModelConfig c;
  c.layout.resize(layers);
  for (int64_t i = 0; i < layers; ++i)
    c.layout[i] = (i % 2 == 0) ? LayerKind::Mamba : LayerKind::Attention;
  return c;
}

ssm::MambaBlockConfig HybridModelConfig::mamba_cfg() const {
  ssm::MambaBlockConfig m;
  m.d_model = width;
  m.d_state = mamba_d_state;
  m.expand = mamba_expand;
  m.conv_width = mamba_conv;
  return m;
}

GraphBatch make_graph_batch(const std::vector<wenv::ChannelRealization>& hs,
                            const FeatureStats& stats) {
  if (hs.empty()) throw std::invalid_argument("make_graph_batch: empty batch");
  GraphBatch b;
  b.B = static_cast<int64_t>(hs.size());
  b.K = hs[0].K;
  b.Nt = hs[0].Nt;
  const int64_t nf = 2 * b.Nt;
  b.node_feats = Tensor::zeros({b.B, b.K, nf});
  b.edge_feats = Tensor::zeros({b.B, b.K, b.K, 4});
  b.h_re = Tensor::zeros({b.B, b.K, b.Nt});
  b.h_im = Tensor::zeros({b.B, b.K, b.Nt});
  b.fwd_idx.resize(b.B * b.K);
  b.fwd_rev_idx.resize(b.B * b.K);
  b.inv_idx.resize(b.B * b.K);
  b.inv_rev_idx.resize(b.B * b.K);
  for (int64_t i = 0; i < b.B; ++i) {
    const auto& h = hs[i];
    if (h.K != b.K || h.Nt != b.Nt)
      throw std::invalid_argument("make_graph_batch: mixed K or Nt in one batch");
    UserGraph g = build_graph(h, &stats);
    std::copy(g.node_feats.begin(), g.node_feats.end(), b.node_feats.data() + i * b.K * nf);
    std::copy(g.edge_feats.begin(), g.edge_feats.end(),
              b.edge_feats.data() + i * b.K * b.K * 4);
    std::copy(h.re.begin(), h.re.end(), b.h_re.data() + i * b.K * b.Nt);
    std::copy(h.im.begin(), h.im.end(), b.h_im.data() + i * b.K * b.Nt);
    for (int64_t t = 0; t < b.K; ++t) {
      int64_t fwd = i * b.K + g.order[t];
      int64_t rev = i * b.K + g.order[b.K - 1 - t];
      b.fwd_idx[i * b.K + t] = fwd;
      b.fwd_rev_idx[i * b.K + t] = rev;
      b.inv_idx[fwd] = i * b.K + t;
      b.inv_rev_idx[rev] = i * b.K + t;
    }
  }
  return b;
}

void BeamformerModel::init(ad::Rng& rng) {
  const int64_t w = cfg.width, nf = 2 * net.antennas, h = cfg.heads;
  params.ensure(prefix + "embed_w", ad::glorot(rng, nf, w));
  params.ensure(prefix + "embed_b", Tensor::zeros({w}));
  for (size_t i = 0; i < cfg.layout.size(); ++i) {
    std::string lp = prefix + "layer" + std::to_string(i) + "/";
    if (cfg.layout[i] == LayerKind::Attention) {
      params.ensure(lp + "wq", ad::glorot(rng, w, w));
      params.ensure(lp + "wk", ad::glorot(rng, w, w));
      params.ensure(lp + "wv", ad::glorot(rng, w, w));
      params.ensure(lp + "wo", ad::glorot(rng, w, w));
      params.ensure(lp + "edge_w1", ad::glorot(rng, 4, cfg.edge_hidden));
      params.ensure(lp + "edge_b1", Tensor::zeros({cfg.edge_hidden}));
      params.ensure(lp + "edge_w2", ad::glorot(rng, cfg.edge_hidden, h));
    } else {
      ssm::init_mamba_params(params, lp + "mamba/", cfg.mamba_cfg(), rng);
    }
  }
  params.ensure(prefix + "head_w", ad::glorot(rng, w, nf));
  params.ensure(prefix + "head_b", Tensor::zeros({nf}));
  params.ensure(prefix + "pool_w", ad::glorot(rng, w, 1));
  params.ensure(prefix + "pool_b", Tensor::zeros({1}));
}

Tensor gat_layer(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                 const Tensor& feats, const Tensor& edges, const HybridModelConfig& cfg) {
  const int64_t B = feats.dim(0), K = feats.dim(1), F = feats.dim(2);
  if (F != cfg.width) throw ad::ShapeError("gat_layer: feature width mismatch");
  const int64_t H = cfg.heads, dk = F / H;
  Tensor xn = ad::layernorm_lastdim(tape, feats);
  auto heads_split = [&](const Tensor& t) {
    Tensor r = ad::reshape(tape, t, {B, K, H, dk});
    r = ad::transpose(tape, r, {0, 2, 1, 3});
    return ad::reshape(tape, r, {B * H, K, dk});
  };
  Tensor q = heads_split(ad::matmul(tape, xn, params(prefix + "wq")));
  Tensor k = heads_split(ad::matmul(tape, xn, params(prefix + "wk")));
  Tensor v = heads_split(ad::matmul(tape, xn, params(prefix + "wv")));
  Tensor scores = ad::matmul(tape, q, ad::transpose(tape, k, {0, 2, 1}));
  scores = ad::scale(tape, scores, 1.0 / std::sqrt(double(dk)));

  // edge-conditioned per-head logit offsets
  Tensor e = ad::reshape(tape, edges, {B * K * K, 4});
  Tensor eh = ad::silu(tape, ad::add(tape, ad::matmul(tape, e, params(prefix + "edge_w1")),
                                     params(prefix + "edge_b1")));
  Tensor el = ad::matmul(tape, eh, params(prefix + "edge_w2"));  // (B*K*K, H)
  el = ad::reshape(tape, el, {B, K, K, H});
  el = ad::transpose(tape, el, {0, 3, 1, 2});
  el = ad::reshape(tape, el, {B * H, K, K});
  scores = ad::add(tape, scores, el);

  Tensor attn = ad::softmax_lastdim(tape, scores);
  Tensor mixed = ad::matmul(tape, attn, v);  // (B*H, K, dk)
  mixed = ad::reshape(tape, mixed, {B, H, K, dk});
  mixed = ad::transpose(tape, mixed, {0, 2, 1, 3});
  mixed = ad::reshape(tape, mixed, {B, K, F});
  Tensor out = ad::matmul(tape, mixed, params(prefix + "wo"));
  return ad::add(tape, feats, out);
}

Tensor mamba_graph_layer(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                         const Tensor& feats, const GraphBatch& batch,
                         const HybridModelConfig& cfg) {
  const int64_t B = feats.dim(0), K = feats.dim(1), F = feats.dim(2);
  Tensor flat = ad::reshape(tape, feats, {B * K, F});
  ssm::MambaBlockConfig mc = cfg.mamba_cfg();

  Tensor seq_f = ad::reshape(tape, ad::gather_rows(tape, flat, batch.fwd_idx), {B, K, F});
  Tensor y_f = ssm::mamba_block_forward(tape, params, prefix + "mamba/", seq_f, mc);
  Tensor back_f = ad::gather_rows(tape, ad::reshape(tape, y_f, {B * K, F}), batch.inv_idx);

  Tensor seq_r = ad::reshape(tape, ad::gather_rows(tape, flat, batch.fwd_rev_idx), {B, K, F});
  Tensor y_r = ssm::mamba_block_forward(tape, params, prefix + "mamba/", seq_r, mc);
  Tensor back_r = ad::gather_rows(tape, ad::reshape(tape, y_r, {B * K, F}), batch.inv_rev_idx);

  Tensor avg = ad::scale(tape, ad::add(tape, back_f, back_r), 0.5);
  return ad::reshape(tape, avg, {B, K, F});
}

Tensor decode_beamformers(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                          const Tensor& feats, const wenv::NetworkConfig& net,
                          const HybridModelConfig& cfg) {
  const int64_t B = feats.dim(0), K = feats.dim(1);
  const int64_t nf = 2 * net.antennas;
  Tensor w_raw = ad::add(tape, ad::matmul(tape, feats, params(prefix + "head_w")),
                         params(prefix + "head_b"));  // (B,K,2Nt)

  // mean over nodes via a constant (B,1,K) averaging matrix
  Tensor onesb = Tensor::full({B, 1, K}, 1.0 / double(K));
  Tensor pooled = ad::matmul(tape, onesb, feats);  // (B,1,F)
  Tensor p = ad::sigmoid(tape, ad::add(tape, ad::matmul(tape, pooled, params(prefix + "pool_w")),
                                       params(prefix + "pool_b")));  // (B,1,1)

  Tensor sq = ad::mul(tape, w_raw, w_raw);
  Tensor total = ad::matmul(tape, ad::reshape(tape, sq, {B, 1, K * nf}),
                            Tensor::full({K * nf, 1}, 1.0));  // (B,1,1)
  Tensor target = ad::scale(tape, p, net.p_max);
  Tensor s = ad::sqrt(tape, ad::divide(tape, target, ad::add_const(tape, total, 1e-12)));
  return ad::mul(tape, w_raw, s);  // broadcast (B,1,1) over (B,K,2Nt)
}

Tensor model_forward(ad::Tape* tape, ad::Bound& params, const BeamformerModel& model,
                     const GraphBatch& batch) {
  const auto& cfg = model.cfg;
  Tensor x = ad::silu(tape, ad::add(tape, ad::matmul(tape, batch.node_feats,
                                                     params(model.prefix + "embed_w")),
                                    params(model.prefix + "embed_b")));
  for (size_t i = 0; i < cfg.layout.size(); ++i) {
    std::string lp = model.prefix + "layer" + std::to_string(i) + "/";
    if (cfg.layout[i] == LayerKind::Attention)
      x = gat_layer(tape, params, lp, x, batch.edge_feats, cfg);
    else
      x = mamba_graph_layer(tape, params, lp, x, batch, cfg);
  }
  return decode_beamformers(tape, params, model.prefix, x, model.net, cfg);
}

Tensor batch_ee(ad::Tape* tape, const GraphBatch& batch, const Tensor& w,
                const wenv::NetworkConfig& net) {
  const int64_t B = batch.B, K = batch.K, Nt = batch.Nt;
  Tensor wre = ad::slice(tape, w, 2, 0, Nt);
  Tensor wim = ad::slice(tape, w, 2, Nt, 2 * Nt);
  Tensor wre_t = ad::transpose(tape, wre, {0, 2, 1});
  Tensor wim_t = ad::transpose(tape, wim, {0, 2, 1});
  // (k,j) entries of h_k^H w_j split into real and imaginary parts
  Tensor re_part = ad::add(tape, ad::matmul(tape, batch.h_re, wre_t),
                           ad::matmul(tape, batch.h_im, wim_t));
  Tensor im_part = ad::sub(tape, ad::matmul(tape, batch.h_re, wim_t),
                           ad::matmul(tape, batch.h_im, wre_t));
  Tensor p2 = ad::add(tape, ad::mul(tape, re_part, re_part), ad::mul(tape, im_part, im_part));

  Tensor eye = Tensor::zeros({K, K});
  Tensor off = Tensor::full({K, K}, 1.0);
  for (int64_t k = 0; k < K; ++k) {
    eye.at({k, k}) = 1.0;
    off.at({k, k}) = 0.0;
  }
  Tensor colsum = Tensor::full({K, 1}, 1.0);
  Tensor sig = ad::matmul(tape, ad::mul(tape, p2, eye), colsum);      // (B,K,1)
  Tensor interf = ad::matmul(tape, ad::mul(tape, p2, off), colsum);   // (B,K,1)
  Tensor sinr = ad::divide(tape, sig, ad::add_const(tape, interf, net.noise_power));
  Tensor rates = ad::scale(tape, ad::log(tape, ad::add_const(tape, sinr, 1.0)),
                           1.0 / std::log(2.0));  // (B,K,1)
  Tensor sum_rate = ad::matmul(tape, ad::transpose(tape, rates, {0, 2, 1}),
                               colsum);  // (B,1,1)

  Tensor sq = ad::mul(tape, w, w);
  Tensor power = ad::matmul(tape, ad::reshape(tape, sq, {B, 1, K * 2 * Nt}),
                            Tensor::full({K * 2 * Nt, 1}, 1.0));  // (B,1,1)
  Tensor ee = ad::divide(tape, sum_rate, ad::add_const(tape, power, net.p_circuit));
  return ad::reshape(tape, ee, {B, 1});
}

wenv::BeamformingDecision decode_one(BeamformerModel& model, const wenv::ChannelRealization& h) {
  GraphBatch batch = make_graph_batch({h}, model.stats);
  ad::Tape scratch;
  ad::Bound bound(scratch, model.params);
  Tensor w = model_forward(nullptr, bound, model, batch);
  wenv::BeamformingDecision d;
  d.K = h.K;
  d.Nt = h.Nt;
  d.re.resize(h.K * h.Nt);
  d.im.resize(h.K * h.Nt);
  for (int64_t k = 0; k < h.K; ++k)
    for (int64_t a = 0; a < h.Nt; ++a) {
      d.re[k * h.Nt + a] = w.at({0, k, a});
      d.im[k * h.Nt + a] = w.at({0, k, h.Nt + a});
    }
  return d;
}

}  // namespace gnnbf
