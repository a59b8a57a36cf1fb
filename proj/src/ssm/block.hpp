#pragma once

#include <string>

#include "ad/module.hpp"
#include "ad/tape.hpp"

namespace ssm {

struct MambaBlockConfig {
  int64_t d_model = 64;
  int64_t d_state = 16;
  int64_t expand = 2;
  int64_t conv_width = 4;
  int64_t dt_rank = 0;  // 0 -> ceil(d_model/16)
  bool prenorm = true;
  bool residual = true;

  int64_t d_inner() const { return expand * d_model; }
  int64_t rank() const { return dt_rank > 0 ? dt_rank : (d_model + 15) / 16; }
};

/// Registers all block parameters under `prefix` (e.g. "ssm/block0/").
void init_mamba_params(ad::ParamStore& store, const std::string& prefix,
                       const MambaBlockConfig& cfg, ad::Rng& rng);

struct SelectedSeqs {
  ad::Tensor delta;  // (B,L,Di) strictly positive
  ad::Tensor b;      // (B,L,N)
  ad::Tensor c;      // (B,L,N)
};

/// Input-dependent selection: delta via projection+softplus, B/C via linear
/// projections. `x_seq` is the inner-width sequence (B,L,Di).
SelectedSeqs select_parameters(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                               const ad::Tensor& x_seq, const MambaBlockConfig& cfg);

/// Full block: in-projection with expansion, causal depthwise conv + SiLU,
/// selective scan, SiLU gate, out-projection, residual. Accepts (L,D) or
/// (B,L,D); output shape equals input shape.
ad::Tensor mamba_block_forward(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                               const ad::Tensor& x, const MambaBlockConfig& cfg);

}  // namespace ssm
