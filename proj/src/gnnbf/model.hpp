#pragma once

#include <string>
#include <vector>

#include "ad/module.hpp"
#include "gnnbf/graph.hpp"
#include "ssm/block.hpp"
#include "wenv/miso.hpp"

namespace gnnbf {

enum class LayerKind { Attention, Mamba };

struct HybridModelConfig {
  std::vector<LayerKind> layout;  // one entry per layer
  int64_t width = 64;
  int64_t heads = 4;
  int64_t edge_hidden = 128;
  int64_t mamba_d_state = 16;
  int64_t mamba_expand = 2;
  int64_t mamba_conv = 4;

  /// All-attention stack of `layers` layers.
  static HybridModelConfig pure_gat(int64_t layers = 4);
  /// Even-indexed layers replaced by Mamba blocks, odd stay attention.
  static HybridModelConfig hybrid(int64_t layers = 4);

  ssm::MambaBlockConfig mamba_cfg() const;
};

/// Stacked, batch-ready tensors for a set of same-K channel realizations.
struct GraphBatch {
  int64_t B = 0, K = 0, Nt = 0;
  ad::Tensor node_feats;  // (B,K,2Nt) standardized
  ad::Tensor edge_feats;  // (B,K,K,4) standardized
  ad::Tensor h_re, h_im;  // (B,K,Nt) raw channel constants for the EE objective
  // Serialization gathers over the flattened (B*K) node axis.
  std::vector<int64_t> fwd_idx;      // batch-local order concatenated
  std::vector<int64_t> fwd_rev_idx;  // reversed order
  std::vector<int64_t> inv_idx;      // inverse of fwd_idx
  std::vector<int64_t> inv_rev_idx;  // inverse of fwd_rev_idx
};

GraphBatch make_graph_batch(const std::vector<wenv::ChannelRealization>& hs,
                            const FeatureStats& stats);

struct BeamformerModel {
  HybridModelConfig cfg;
  wenv::NetworkConfig net;
  FeatureStats stats;
  ad::ParamStore params;
  std::string prefix = "gnn/";

  void init(ad::Rng& rng);
};

/// Multi-head attention over all node pairs with edge-conditioned logits,
/// residual + pre-normalization. Permutation-equivariant.
ad::Tensor gat_layer(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                     const ad::Tensor& feats, const ad::Tensor& edges,
                     const HybridModelConfig& cfg);

/// Serialize nodes by the batch order, run the Mamba block forward and
/// reversed, average, and de-serialize.
ad::Tensor mamba_graph_layer(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                             const ad::Tensor& feats, const GraphBatch& batch,
                             const HybridModelConfig& cfg);

/// Node features -> per-user beamformers, always feasible: per-node linear
/// head plus a pooled sigmoid power fraction, jointly scaled to p * P_max.
ad::Tensor decode_beamformers(ad::Tape* tape, ad::Bound& params, const std::string& prefix,
                              const ad::Tensor& feats, const wenv::NetworkConfig& net,
                              const HybridModelConfig& cfg);

/// Full model: embed -> layer stack -> decode. Returns (B,K,2Nt) beamformers.
ad::Tensor model_forward(ad::Tape* tape, ad::Bound& params, const BeamformerModel& model,
                         const GraphBatch& batch);

/// Differentiable EE of beamformers against the batch channels: (B,1).
ad::Tensor batch_ee(ad::Tape* tape, const GraphBatch& batch, const ad::Tensor& w,
                    const wenv::NetworkConfig& net);

/// Single-realization inference to a concrete decision.
wenv::BeamformingDecision decode_one(BeamformerModel& model, const wenv::ChannelRealization& h);

}  // namespace gnnbf
