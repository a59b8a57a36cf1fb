#include "gnnbf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace gnnbf {

namespace {

constexpr int64_t kEdgeDims = 4;

std::vector<double> raw_node_feats(const wenv::ChannelRealization& h) {
  std::vector<double> f(h.K * 2 * h.Nt);
  for (int64_t k = 0; k < h.K; ++k) {
    for (int64_t a = 0; a < h.Nt; ++a) {
      f[k * 2 * h.Nt + a] = h.re[k * h.Nt + a];
      f[k * 2 * h.Nt + h.Nt + a] = h.im[k * h.Nt + a];
    }
  }
  return f;
}

std::vector<double> raw_edge_feats(const wenv::ChannelRealization& h) {
  std::vector<double> e(h.K * h.K * kEdgeDims);
  std::vector<double> norms(h.K);
  for (int64_t k = 0; k < h.K; ++k) norms[k] = std::sqrt(h.norm_sq(k));
  for (int64_t i = 0; i < h.K; ++i)
    for (int64_t j = 0; j < h.K; ++j) {
      std::complex<double> dot = 0;
      for (int64_t a = 0; a < h.Nt; ++a) dot += std::conj(h.at(i, a)) * h.at(j, a);
      double* p = e.data() + (i * h.K + j) * kEdgeDims;
      p[0] = dot.real();
      p[1] = dot.imag();
      p[2] = norms[i];
      p[3] = norms[j];
    }
  return e;
}

}  // namespace

FeatureStats compute_feature_stats(const std::vector<wenv::ChannelRealization>& train) {
  if (train.empty()) throw std::invalid_argument("compute_feature_stats: empty training set");
  const int64_t ndims = 2 * train[0].Nt;
  FeatureStats s;
  s.node_mean.assign(ndims, 0.0);
  s.node_std.assign(ndims, 0.0);
  s.edge_mean.assign(kEdgeDims, 0.0);
  s.edge_std.assign(kEdgeDims, 0.0);
  int64_t nrows = 0, erows = 0;
  for (const auto& h : train) {
    auto nf = raw_node_feats(h);
    for (int64_t k = 0; k < h.K; ++k, ++nrows)
      for (int64_t d = 0; d < ndims; ++d) s.node_mean[d] += nf[k * ndims + d];
    auto ef = raw_edge_feats(h);
    for (int64_t r = 0; r < h.K * h.K; ++r, ++erows)
      for (int64_t d = 0; d < kEdgeDims; ++d) s.edge_mean[d] += ef[r * kEdgeDims + d];
  }
  for (auto& v : s.node_mean) v /= nrows;
  for (auto& v : s.edge_mean) v /= erows;
  for (const auto& h : train) {
    auto nf = raw_node_feats(h);
    for (int64_t k = 0; k < h.K; ++k)
      for (int64_t d = 0; d < ndims; ++d) {
        double c = nf[k * ndims + d] - s.node_mean[d];
        s.node_std[d] += c * c;
      }
    auto ef = raw_edge_feats(h);
    for (int64_t r = 0; r < h.K * h.K; ++r)
      for (int64_t d = 0; d < kEdgeDims; ++d) {
        double c = ef[r * kEdgeDims + d] - s.edge_mean[d];
        s.edge_std[d] += c * c;
      }
  }
  for (auto& v : s.node_std) v = std::sqrt(v / std::max<int64_t>(1, nrows - 1)) + 1e-12;
  for (auto& v : s.edge_std) v = std::sqrt(v / std::max<int64_t>(1, erows - 1)) + 1e-12;
  return s;
}

UserGraph build_graph(const wenv::ChannelRealization& h, const FeatureStats* stats) {
  UserGraph g;
  g.K = h.K;
  g.Nt = h.Nt;
  g.node_feats = raw_node_feats(h);
  g.edge_feats = raw_edge_feats(h);
  if (stats) {
    const int64_t ndims = 2 * h.Nt;
    for (int64_t k = 0; k < h.K; ++k)
      for (int64_t d = 0; d < ndims; ++d) {
        double& v = g.node_feats[k * ndims + d];
        v = (v - stats->node_mean[d]) / stats->node_std[d];
      }
    for (int64_t r = 0; r < h.K * h.K; ++r)
      for (int64_t d = 0; d < kEdgeDims; ++d) {
        double& v = g.edge_feats[r * kEdgeDims + d];
        v = (v - stats->edge_mean[d]) / stats->edge_std[d];
      }
  }
  g.order.resize(h.K);
  std::iota(g.order.begin(), g.order.end(), 0);
  std::vector<double> norms(h.K);
  for (int64_t k = 0; k < h.K; ++k) norms[k] = h.norm_sq(k);
  std::stable_sort(g.order.begin(), g.order.end(),
                   [&](int64_t a, int64_t b) { return norms[a] > norms[b]; });
  return g;
}

}  // namespace gnnbf
