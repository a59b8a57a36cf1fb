#include "jscd/model.hpp"

#include <cmath>

namespace jscd {

using ad::Tensor;

ssm::MambaBlockConfig JscdModelConfig::mamba_cfg() const {
  ssm::MambaBlockConfig m;
  m.d_model = width;
  m.d_state = mamba_d_state;
  m.expand = mamba_expand;
  m.conv_width = mamba_conv;
  return m;
}

namespace {

Tensor positional_encoding(int64_t L, int64_t W) {
  Tensor pe = Tensor::zeros({L, W});
  for (int64_t t = 0; t < L; ++t)
    for (int64_t d = 0; d < W; ++d) {
      double angle = t / std::pow(10000.0, 2.0 * (d / 2) / double(W));
      pe.at({t, d}) = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

Tensor dense(ad::Tape* tape, ad::Bound& p, const std::string& w, const std::string& b,
             const Tensor& x) {
  return ad::add(tape, ad::matmul(tape, x, p(w)), p(b));
}

Tensor mha(ad::Tape* tape, ad::Bound& p, const std::string& prefix, const Tensor& q_in,
           const Tensor& kv_in, int64_t heads, bool causal) {
  const int64_t B = q_in.dim(0), Lq = q_in.dim(1), W = q_in.dim(2), Lk = kv_in.dim(1);
  const int64_t dk = W / heads;
  auto split = [&](const Tensor& t, int64_t L) {
    Tensor r = ad::reshape(tape, t, {B, L, heads, dk});
    r = ad::transpose(tape, r, {0, 2, 1, 3});
    return ad::reshape(tape, r, {B * heads, L, dk});
  };
  Tensor q = split(ad::matmul(tape, q_in, p(prefix + "wq")), Lq);
  Tensor k = split(ad::matmul(tape, kv_in, p(prefix + "wk")), Lk);
  Tensor v = split(ad::matmul(tape, kv_in, p(prefix + "wv")), Lk);
  Tensor scores = ad::scale(tape, ad::matmul(tape, q, ad::transpose(tape, k, {0, 2, 1})),
                            1.0 / std::sqrt(double(dk)));
  if (causal) {
    Tensor mask = Tensor::zeros({Lq, Lk});
    for (int64_t i = 0; i < Lq; ++i)
      for (int64_t j = i + 1; j < Lk; ++j) mask.at({i, j}) = -1e30;
    scores = ad::add(tape, scores, mask);
  }
  Tensor attn = ad::softmax_lastdim(tape, scores);
  Tensor mixed = ad::matmul(tape, attn, v);
  mixed = ad::reshape(tape, mixed, {B, heads, Lq, dk});
  mixed = ad::transpose(tape, mixed, {0, 2, 1, 3});
  mixed = ad::reshape(tape, mixed, {B, Lq, W});
  return ad::matmul(tape, mixed, p(prefix + "wo"));
}

Tensor ffn(ad::Tape* tape, ad::Bound& p, const std::string& prefix, const Tensor& x) {
  Tensor h = ad::silu(tape, dense(tape, p, prefix + "ffn_w1", prefix + "ffn_b1", x));
  return dense(tape, p, prefix + "ffn_w2", prefix + "ffn_b2", h);
}

Tensor embed_ids(ad::Tape* tape, ad::Bound& p, const std::string& prefix,
                 const std::vector<std::vector<int32_t>>& ids) {
  const int64_t B = static_cast<int64_t>(ids.size());
  const int64_t L = static_cast<int64_t>(ids[0].size());
  std::vector<int64_t> flat(B * L);
  for (int64_t i = 0; i < B; ++i)
    for (int64_t t = 0; t < L; ++t) flat[i * L + t] = ids[i][t];
  Tensor emb = ad::gather_rows(tape, p(prefix + "embed"), flat);
  int64_t W = emb.dim(1);
  emb = ad::reshape(tape, emb, {B, L, W});
  return ad::add(tape, emb, positional_encoding(L, W));
}

// Semantic encoder + optional Mamba + channel encoder + power normalization.
Tensor encode_frame(ad::Tape* tape, ad::Bound& p, const JscdModel& model,
                    const std::vector<std::vector<int32_t>>& src) {
  const auto& cfg = model.cfg;
  const int64_t B = static_cast<int64_t>(src.size());
  const int64_t L = static_cast<int64_t>(src[0].size());
  Tensor x = embed_ids(tape, p, model.prefix, src);
  for (int64_t i = 0; i < cfg.enc_layers; ++i) {
    std::string lp = model.prefix + "enc" + std::to_string(i) + "/";
    Tensor h = ad::layernorm_lastdim(tape, x);
    x = ad::add(tape, x, mha(tape, p, lp, h, h, cfg.heads, false));
    Tensor h2 = ad::layernorm_lastdim(tape, x);
    x = ad::add(tape, x, ffn(tape, p, lp, h2));
  }
  x = ad::layernorm_lastdim(tape, x);
  if (cfg.tx_mamba)
    x = ssm::mamba_block_forward(tape, p, model.prefix + "tx_mamba/", x, cfg.mamba_cfg());
  Tensor sym = dense(tape, p, model.prefix + "ce_w", model.prefix + "ce_b", x);  // (B,L,C)
  Tensor flat = ad::reshape(tape, sym, {B, L * cfg.channel_dim});
  Tensor ms = ad::matmul(tape, ad::mul(tape, flat, flat),
                         Tensor::full({L * cfg.channel_dim, 1}, 1.0 / double(L * cfg.channel_dim)));
  Tensor inv = ad::sqrt(tape, ad::divide(tape, Tensor::scalar(1.0),
                                         ad::add_const(tape, ms, 1e-12)));  // (B,1)
  return ad::mul(tape, flat, inv);
}

// Channel decoder + optional Mamba + normalization into decoder memory.
Tensor decode_memory(ad::Tape* tape, ad::Bound& p, const JscdModel& model, const Tensor& y,
                     int64_t L) {
  const auto& cfg = model.cfg;
  const int64_t B = y.dim(0);
  Tensor x = ad::reshape(tape, y, {B, L, cfg.channel_dim});
  x = ad::silu(tape, dense(tape, p, model.prefix + "cd_w1", model.prefix + "cd_b1", x));
  x = dense(tape, p, model.prefix + "cd_w2", model.prefix + "cd_b2", x);
  if (cfg.rx_mamba)
    x = ssm::mamba_block_forward(tape, p, model.prefix + "rx_mamba/", x, cfg.mamba_cfg());
  return ad::layernorm_lastdim(tape, x);
}

Tensor decoder_logits(ad::Tape* tape, ad::Bound& p, const JscdModel& model,
                      const std::vector<std::vector<int32_t>>& dec_in, const Tensor& memory) {
  const auto& cfg = model.cfg;
  Tensor x = embed_ids(tape, p, model.prefix, dec_in);
  for (int64_t i = 0; i < cfg.dec_layers; ++i) {
    std::string lp = model.prefix + "dec" + std::to_string(i) + "/";
    Tensor h = ad::layernorm_lastdim(tape, x);
    x = ad::add(tape, x, mha(tape, p, lp + "self_", h, h, cfg.heads, true));
    Tensor h2 = ad::layernorm_lastdim(tape, x);
    x = ad::add(tape, x, mha(tape, p, lp + "cross_", h2, memory, cfg.heads, false));
    Tensor h3 = ad::layernorm_lastdim(tape, x);
    x = ad::add(tape, x, ffn(tape, p, lp, h3));
  }
  x = ad::layernorm_lastdim(tape, x);
  return dense(tape, p, model.prefix + "out_w", model.prefix + "out_b", x);
}

void init_attention(ad::ParamStore& store, const std::string& prefix, int64_t w, ad::Rng& rng) {
  store.ensure(prefix + "wq", ad::glorot(rng, w, w));
  store.ensure(prefix + "wk", ad::glorot(rng, w, w));
  store.ensure(prefix + "wv", ad::glorot(rng, w, w));
  store.ensure(prefix + "wo", ad::glorot(rng, w, w));
}

void init_ffn(ad::ParamStore& store, const std::string& prefix, int64_t w, int64_t mult,
              ad::Rng& rng) {
  store.ensure(prefix + "ffn_w1", ad::glorot(rng, w, w * mult));
  store.ensure(prefix + "ffn_b1", Tensor::zeros({w * mult}));
  store.ensure(prefix + "ffn_w2", ad::glorot(rng, w * mult, w));
  store.ensure(prefix + "ffn_b2", Tensor::zeros({w}));
}

}  // namespace

void JscdModel::init(ad::Rng& rng) {
  if (cfg.vocab < 5) throw std::invalid_argument("jscd model: vocab not set");
  const int64_t w = cfg.width;
  params.ensure(prefix + "embed", ad::randn(rng, {cfg.vocab, w}, 0.05));
  for (int64_t i = 0; i < cfg.enc_layers; ++i) {
    std::string lp = prefix + "enc" + std::to_string(i) + "/";
    init_attention(params, lp, w, rng);
    init_ffn(params, lp, w, cfg.ffn_mult, rng);
  }
  if (cfg.tx_mamba) ssm::init_mamba_params(params, prefix + "tx_mamba/", cfg.mamba_cfg(), rng);
  params.ensure(prefix + "ce_w", ad::glorot(rng, w, cfg.channel_dim));
  params.ensure(prefix + "ce_b", Tensor::zeros({cfg.channel_dim}));
  params.ensure(prefix + "cd_w1", ad::glorot(rng, cfg.channel_dim, w));
  params.ensure(prefix + "cd_b1", Tensor::zeros({w}));
  params.ensure(prefix + "cd_w2", ad::glorot(rng, w, w));
  params.ensure(prefix + "cd_b2", Tensor::zeros({w}));
  if (cfg.rx_mamba) ssm::init_mamba_params(params, prefix + "rx_mamba/", cfg.mamba_cfg(), rng);
  for (int64_t i = 0; i < cfg.dec_layers; ++i) {
    std::string lp = prefix + "dec" + std::to_string(i) + "/";
    init_attention(params, lp + "self_", w, rng);
    init_attention(params, lp + "cross_", w, rng);
    init_ffn(params, lp, w, cfg.ffn_mult, rng);
  }
  params.ensure(prefix + "out_w", ad::glorot(rng, w, cfg.vocab));
  params.ensure(prefix + "out_b", Tensor::zeros({cfg.vocab}));
}

Tensor teacher_forced_logits(ad::Tape* tape, ad::Bound& params, const JscdModel& model,
                             const std::vector<std::vector<int32_t>>& src,
                             const ad::Tensor& channel_noise) {
  if (src.empty()) throw std::invalid_argument("teacher_forced_logits: empty batch");
  const int64_t L = static_cast<int64_t>(src[0].size());
  for (const auto& row : src)
    if (static_cast<int64_t>(row.size()) != L)
      throw std::invalid_argument("teacher_forced_logits: ragged batch");
  Tensor frame = encode_frame(tape, params, model, src);
  if (channel_noise.defined()) {
    if (channel_noise.shape() != frame.shape())
      throw ad::ShapeError("teacher_forced_logits: channel noise shape mismatch");
    frame = ad::add(tape, frame, channel_noise);
  }
  Tensor memory = decode_memory(tape, params, model, frame, L);
  std::vector<std::vector<int32_t>> dec_in(src.size());
  for (size_t i = 0; i < src.size(); ++i)
    dec_in[i] = std::vector<int32_t>(src[i].begin(), src[i].end() - 1);
  return decoder_logits(tape, params, model, dec_in, memory);
}

wenv::SymbolFrame transmit_encode(JscdModel& model, const TokenSequence& seq) {
  if (static_cast<int64_t>(seq.ids.size()) > model.cfg.max_len)
    throw std::invalid_argument("transmit_encode: sequence exceeds the length cap");
  ad::Tape scratch;
  ad::Bound bound(scratch, model.params);
  Tensor frame = encode_frame(nullptr, bound, model, {seq.ids});
  wenv::SymbolFrame f;
  f.s.assign(frame.data(), frame.data() + frame.size());
  f.normalized = true;
  return f;
}

TokenSequence receive_decode(JscdModel& model, const wenv::SymbolFrame& frame) {
  const auto& cfg = model.cfg;
  if (frame.s.size() % cfg.channel_dim != 0)
    throw std::invalid_argument("receive_decode: frame size is not a multiple of channel dim");
  const int64_t L = static_cast<int64_t>(frame.s.size()) / cfg.channel_dim;
  ad::Tape scratch;
  ad::Bound bound(scratch, model.params);
  Tensor y = Tensor::from({1, L * cfg.channel_dim}, frame.s);
  Tensor memory = decode_memory(nullptr, bound, model, y, L);
  TokenSequence out;
  out.ids = {Vocab::kStart};
  for (int64_t step = 0; step < cfg.max_len - 1; ++step) {
    Tensor logits = decoder_logits(nullptr, bound, model, {out.ids}, memory);
    const int64_t V = cfg.vocab;
    const double* last = logits.data() + (logits.size() - V);
    int32_t best = 0;
    double best_v = last[0];
    for (int64_t v = 1; v < V; ++v)
      if (last[v] > best_v) {
        best_v = last[v];
        best = static_cast<int32_t>(v);
      }
    out.ids.push_back(best);
    if (best == Vocab::kEnd) break;
  }
  if (out.ids.back() != Vocab::kEnd) out.ids.push_back(Vocab::kEnd);
  return out;
}

}  // namespace jscd
