#pragma once

#include <optional>

#include "gnnbf/model.hpp"

namespace gnnbf {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double lr = 2e-3;
  int patience = 6;  // epochs without val improvement before stopping
  uint64_t seed = 1;
  bool verbose = false;
};

struct EpochStat {
  int epoch = 0;
  double train_ee = 0;
  double val_ee = 0;
  double val_ratio = 0;  // vs oracle when oracle EEs were supplied
};

struct TrainResult {
  std::vector<EpochStat> curve;
  double best_val_ee = 0;
};

/// Unsupervised training: loss = -mean EE over minibatches. Early-stops on a
/// validation plateau and restores the best parameters.
/// Throws ad::DivergenceError on a non-finite loss.
TrainResult train_beamformer(BeamformerModel& model,
                             const std::vector<wenv::ChannelRealization>& train,
                             const std::vector<wenv::ChannelRealization>& val,
                             const std::vector<double>* val_oracle_ee, const TrainConfig& cfg);

/// Mean EE of the model over a set of channels (no tape).
double evaluate_mean_ee(BeamformerModel& model, const std::vector<wenv::ChannelRealization>& hs,
                        int batch_size = 256);

struct LatencyRow {
  std::string model;  // gat | hybrid | gat-layer | mamba-layer
  int64_t K = 0;
  double median_us = 0;
  double p90_us = 0;
};

/// Median single-threaded forward latency per user count, batch size 1,
/// for whole models and for the two layer types in isolation.
std::vector<LatencyRow> benchmark_inference(BeamformerModel& gat, BeamformerModel& hybrid,
                                            const std::vector<int64_t>& user_counts, int repeats);

}  // namespace gnnbf
