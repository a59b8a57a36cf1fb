#pragma once

#include <cstdint>
#include <vector>

#include "wenv/miso.hpp"

namespace gnnbf {

/// Per-dimension standardization statistics computed from a training set.
struct FeatureStats {
  std::vector<double> node_mean, node_std;  // (2Nt)
  std::vector<double> edge_mean, edge_std;  // (4)
};

FeatureStats compute_feature_stats(const std::vector<wenv::ChannelRealization>& train);

/// Fully connected user graph. Node k carries (Re h_k, Im h_k); the edge
/// (i,j) carries (Re<h_i,h_j>, Im<h_i,h_j>, |h_i|, |h_j|). Both standardized
/// when stats are supplied. `order` is the canonical serialization order:
/// descending channel norm, index tie-break.
struct UserGraph {
  int64_t K = 0, Nt = 0;
  std::vector<double> node_feats;  // (K, 2Nt)
  std::vector<double> edge_feats;  // (K, K, 4)
  std::vector<int64_t> order;      // (K)
};

UserGraph build_graph(const wenv::ChannelRealization& h, const FeatureStats* stats);

}  // namespace gnnbf
