#pragma once

#include <string>

#include "ad/module.hpp"
#include "jscd/text.hpp"
#include "ssm/block.hpp"
#include "wenv/awgn.hpp"

namespace jscd {

struct JscdModelConfig {
  int64_t vocab = 0;
  int64_t width = 128;
  int64_t heads = 4;
  int64_t enc_layers = 2;
  int64_t dec_layers = 2;
  int64_t ffn_mult = 2;
  int64_t channel_dim = 16;  // real symbols per token
  int64_t max_len = 36;
  bool tx_mamba = false;  // Mamba block between semantic encoder and channel encoder
  bool rx_mamba = false;  // Mamba block between channel decoder and semantic decoder
  int64_t mamba_d_state = 16;
  int64_t mamba_expand = 2;
  int64_t mamba_conv = 4;

  ssm::MambaBlockConfig mamba_cfg() const;
};

struct JscdModel {
  JscdModelConfig cfg;
  ad::ParamStore params;
  std::string prefix = "jscd/";

  void init(ad::Rng& rng);
};

/// Teacher-forced forward pass for one same-length batch.
///   src (B,L) token ids -> logits (B,L,vocab) for next-token targets.
/// The frame passes through AWGN with the supplied per-element noise
/// (constant tensor, shape (B, L*channel_dim)); pass an empty tensor for a
/// noiseless channel.
ad::Tensor teacher_forced_logits(ad::Tape* tape, ad::Bound& params, const JscdModel& model,
                                 const std::vector<std::vector<int32_t>>& src,
                                 const ad::Tensor& channel_noise);

/// Transmitter: token ids -> power-normalized symbol frame.
wenv::SymbolFrame transmit_encode(JscdModel& model, const TokenSequence& seq);

/// Receiver: symbol frame -> greedy-decoded token sequence.
TokenSequence receive_decode(JscdModel& model, const wenv::SymbolFrame& frame);

}  // namespace jscd
