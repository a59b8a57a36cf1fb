#include "ssm/block.hpp"

#include <cmath>

namespace ssm {

using ad::Tensor;

void init_mamba_params(ad::ParamStore& store, const std::string& prefix,
                       const MambaBlockConfig& cfg, ad::Rng& rng) {
  const int64_t dm = cfg.d_model, di = cfg.d_inner(), n = cfg.d_state, r = cfg.rank();
  store.ensure(prefix + "in_proj", ad::glorot(rng, dm, 2 * di));
  store.ensure(prefix + "conv_w",
               ad::rand_uniform(rng, {cfg.conv_width, di}, -1.0 / std::sqrt(double(cfg.conv_width)),
                                1.0 / std::sqrt(double(cfg.conv_width))));
  store.ensure(prefix + "conv_b", Tensor::zeros({di}));
  store.ensure(prefix + "w_b", ad::glorot(rng, di, n));
  store.ensure(prefix + "w_c", ad::glorot(rng, di, n));
  store.ensure(prefix + "w_dt_down", ad::glorot(rng, di, r));
  store.ensure(prefix + "w_dt_up", ad::glorot(rng, r, di));
  // softplus(dt_bias) spread over [1e-3, 1e-1] keeps early steps stable
  {
    Tensor bias = Tensor::zeros({di});
    std::uniform_real_distribution<double> u(std::log(1e-3), std::log(1e-1));
    for (int64_t i = 0; i < di; ++i) {
      double dt = std::exp(u(rng));
      bias.data()[i] = std::log(std::expm1(dt));
    }
    store.ensure(prefix + "dt_bias", bias);
  }
  // effective transition -1..-N per channel, stored as log magnitude
  {
    Tensor a_log = Tensor::zeros({di, n});
    for (int64_t d = 0; d < di; ++d)
      for (int64_t i = 0; i < n; ++i) a_log.at({d, i}) = std::log(double(i + 1));
    store.ensure(prefix + "a_log", a_log);
  }
  store.ensure(prefix + "d_skip", Tensor::full({di}, 1.0));
  store.ensure(prefix + "out_proj", ad::glorot(rng, di, dm));
}

SelectedSeqs select_parameters(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                               const ad::Tensor& x_seq, const MambaBlockConfig& cfg) {
  if (x_seq.ndim() != 3 || x_seq.dim(2) != cfg.d_inner())
    throw ad::ShapeError("select_parameters: expected width " + std::to_string(cfg.d_inner()) +
                         ", got input " + ad::shape_str(x_seq.shape()));
  Tensor dt_low = ad::matmul(tape, x_seq, params(prefix + "w_dt_down"));
  Tensor dt_pre = ad::add(tape, ad::matmul(tape, dt_low, params(prefix + "w_dt_up")),
                          params(prefix + "dt_bias"));
  SelectedSeqs out;
  out.delta = ad::softplus(tape, dt_pre);
  out.b = ad::matmul(tape, x_seq, params(prefix + "w_b"));
  out.c = ad::matmul(tape, x_seq, params(prefix + "w_c"));
  return out;
}

namespace {

// Depthwise causal convolution over the time axis of (B,L,Di).
Tensor causal_conv(ad::Tape* tape, ad::Bound& params, const std::string& prefix, const Tensor& x,
                   const MambaBlockConfig& cfg) {
  const int64_t B = x.dim(0), L = x.dim(1), di = x.dim(2), W = cfg.conv_width;
  Tensor w = params(prefix + "conv_w");
  Tensor padded = x;
  if (W > 1) {
    Tensor zeros = Tensor::zeros({B, W - 1, di});
    padded = ad::concat(tape, {zeros, x}, 1);
  }
  Tensor acc;
  for (int64_t k = 0; k < W; ++k) {
    Tensor tap = ad::slice(tape, padded, 1, k, k + L);
    Tensor wk = ad::reshape(tape, ad::slice(tape, w, 0, k, k + 1), {di});
    Tensor term = ad::mul(tape, tap, wk);
    acc = k == 0 ? term : ad::add(tape, acc, term);
  }
  return ad::add(tape, acc, params(prefix + "conv_b"));
}

}  // namespace

Tensor mamba_block_forward(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                           const Tensor& x, const MambaBlockConfig& cfg) {
  bool flat = x.ndim() == 2;
  Tensor xb = flat ? ad::reshape(tape, x, {1, x.dim(0), x.dim(1)}) : x;
  if (xb.ndim() != 3 || xb.dim(2) != cfg.d_model)
    throw ad::ShapeError("mamba_block_forward: expected (B,L," + std::to_string(cfg.d_model) +
                         "), got " + ad::shape_str(x.shape()));
  const int64_t di = cfg.d_inner();

  Tensor xn = cfg.prenorm ? ad::layernorm_lastdim(tape, xb) : xb;
  Tensor xz = ad::matmul(tape, xn, params(prefix + "in_proj"));
  Tensor xa = ad::slice(tape, xz, 2, 0, di);
  Tensor z = ad::slice(tape, xz, 2, di, 2 * di);

  Tensor xc = ad::silu(tape, causal_conv(tape, params, prefix, xa, cfg));

  SelectedSeqs sel = select_parameters(tape, params, prefix, xc, cfg);
  Tensor a_eff = ad::neg(tape, ad::exp(tape, params(prefix + "a_log")));
  Tensor y = ad::ssm_scan(tape, sel.delta, a_eff, sel.b, sel.c, xc);
  y = ad::add(tape, y, ad::mul(tape, xc, params(prefix + "d_skip")));

  y = ad::mul(tape, y, ad::silu(tape, z));
  Tensor out = ad::matmul(tape, y, params(prefix + "out_proj"));
  if (cfg.residual) out = ad::add(tape, out, xb);
  return flat ? ad::reshape(tape, out, {out.dim(1), out.dim(2)}) : out;
}

}  // namespace ssm
