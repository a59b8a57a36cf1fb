#pragma once

#include "jscd/bleu.hpp"
#include "jscd/model.hpp"

namespace jscd {

struct JscdTrainConfig {
  int epochs = 6;
  int batch_size = 64;
  double lr = 1e-3;
  double snr_lo_db = 0.0;   // per-batch SNR drawn uniformly from this range
  double snr_hi_db = 18.0;
  uint64_t seed = 1;
  int patience = 3;
  bool verbose = false;
};

struct JscdEpochStat {
  int epoch = 0;
  double train_loss = 0;
  double val_token_acc = 0;
};

struct JscdTrainResult {
  std::vector<JscdEpochStat> curve;
  double best_val_acc = 0;
};

/// Teacher-forced cross-entropy through the AWGN channel, per-batch SNR from
/// the configured range. Early-stops on a validation-accuracy plateau and
/// restores the best parameters. Throws ad::DivergenceError on non-finite loss.
JscdTrainResult train_jscd(JscdModel& model, const std::vector<std::string>& train_corpus,
                           const std::vector<std::string>& val_corpus, const Vocab& vocab,
                           const JscdTrainConfig& cfg);

/// Teacher-forced next-token accuracy at a fixed SNR.
double token_accuracy(JscdModel& model, const std::vector<std::string>& corpus,
                      const Vocab& vocab, double snr_db, uint64_t seed);

struct SnrBleuRow {
  std::string variant;
  double snr_db = 0;
  BleuReport bleu;
};

/// Transmit -> AWGN -> greedy decode over the corpus at each SNR with fixed
/// per-sentence noise seeds; corpus BLEU per SNR.
std::vector<SnrBleuRow> evaluate_over_snr(JscdModel& model,
                                          const std::vector<std::string>& test_corpus,
                                          const Vocab& vocab,
                                          const std::vector<double>& snr_list_db, uint64_t seed,
                                          const std::string& variant_name);

}  // namespace jscd
