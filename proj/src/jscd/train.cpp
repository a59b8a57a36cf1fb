#include "jscd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "ad/optim.hpp"

namespace jscd {

using ad::Tensor;

namespace {

struct Buckets {
  // same-length batches; each entry is the list of tokenized rows
  std::vector<std::vector<std::vector<int32_t>>> batches;
};

Buckets make_batches(const std::vector<std::string>& corpus, const Vocab& vocab, int64_t cap,
                     int batch_size) {
  std::map<int64_t, std::vector<std::vector<int32_t>>> by_len;
  for (const auto& line : corpus) {
    TokenSequence seq = tokenize(line, vocab, cap);
    by_len[static_cast<int64_t>(seq.ids.size())].push_back(seq.ids);
  }
  Buckets out;
  for (auto& [len, rows] : by_len) {
    for (size_t start = 0; start < rows.size(); start += batch_size) {
      size_t stop = std::min(rows.size(), start + batch_size);
      out.batches.emplace_back(rows.begin() + start, rows.begin() + stop);
    }
  }
  return out;
}

// Cross-entropy of next-token predictions; logits (B,L-1,V), targets from src.
Tensor batch_loss(ad::Tape* tape, const Tensor& logits,
                  const std::vector<std::vector<int32_t>>& src) {
  const int64_t B = logits.dim(0), L = logits.dim(1), V = logits.dim(2);
  Tensor onehot = Tensor::zeros({B, L, V});
  for (int64_t i = 0; i < B; ++i)
    for (int64_t t = 0; t < L; ++t) onehot.at({i, t, src[i][t + 1]}) = 1.0;
  Tensor logp = ad::log(tape, ad::softmax_lastdim(tape, logits));
  Tensor picked = ad::reduce_sum(tape, ad::mul(tape, logp, onehot));
  return ad::scale(tape, picked, -1.0 / double(B * L));
}

Tensor noise_tensor(ad::Rng& rng, int64_t B, int64_t n, double snr_db) {
  double sigma = std::sqrt(std::pow(10.0, -snr_db / 10.0));
  return ad::randn(rng, {B, n}, sigma);
}

}  // namespace

double token_accuracy(JscdModel& model, const std::vector<std::string>& corpus,
                      const Vocab& vocab, double snr_db, uint64_t seed) {
  Buckets buckets = make_batches(corpus, vocab, model.cfg.max_len, 128);
  ad::Rng rng(seed);
  int64_t correct = 0, total = 0;
  for (const auto& batch : buckets.batches) {
    const int64_t B = static_cast<int64_t>(batch.size());
    const int64_t L = static_cast<int64_t>(batch[0].size());
    Tensor noise = noise_tensor(rng, B, L * model.cfg.channel_dim, snr_db);
    ad::Tape scratch;
    ad::Bound bound(scratch, model.params);
    Tensor logits = teacher_forced_logits(nullptr, bound, model, batch, noise);
    const int64_t V = model.cfg.vocab;
    for (int64_t i = 0; i < B; ++i)
      for (int64_t t = 0; t + 1 < L; ++t) {
        const double* row = logits.data() + (i * (L - 1) + t) * V;
        int32_t best = 0;
        for (int64_t v = 1; v < V; ++v)
          if (row[v] > row[best]) best = static_cast<int32_t>(v);
        correct += best == batch[i][t + 1];
        ++total;
      }
  }
  return total > 0 ? double(correct) / double(total) : 0.0;
}

JscdTrainResult train_jscd(JscdModel& model, const std::vector<std::string>& train_corpus,
                           const std::vector<std::string>& val_corpus, const Vocab& vocab,
                           const JscdTrainConfig& cfg) {
  if (train_corpus.size() < 1000)
    throw std::invalid_argument("train_jscd: corpus must have at least 1000 sentences");
  Buckets buckets = make_batches(train_corpus, vocab, model.cfg.max_len, cfg.batch_size);
  ad::Adam opt({cfg.lr});
  ad::Rng rng(cfg.seed);
  std::vector<size_t> order(buckets.batches.size());
  std::iota(order.begin(), order.end(), 0);

  JscdTrainResult result;
  ad::ParamStore best_params;
  double best_acc = -1;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int64_t nb = 0;
    std::uniform_real_distribution<double> snr_dist(cfg.snr_lo_db, cfg.snr_hi_db);
    for (size_t bi : order) {
      const auto& batch = buckets.batches[bi];
      const int64_t B = static_cast<int64_t>(batch.size());
      const int64_t L = static_cast<int64_t>(batch[0].size());
      double snr = snr_dist(rng);
      Tensor noise = noise_tensor(rng, B, L * model.cfg.channel_dim, snr);
      ad::Tape tape;
      ad::Bound bound(tape, model.params);
      Tensor logits = teacher_forced_logits(&tape, bound, model, batch, noise);
      Tensor loss = batch_loss(&tape, logits, batch);
      double lv = loss.item();
      if (!std::isfinite(lv))
        throw ad::DivergenceError("train_jscd: non-finite loss at epoch " +
                                  std::to_string(epoch));
      loss_sum += lv;
      ++nb;
      auto grads = tape.backward(loss);
      opt.step(model.params, bound.grads_by_name(grads));
    }
    JscdEpochStat st;
    st.epoch = epoch;
    st.train_loss = loss_sum / std::max<int64_t>(1, nb);
    st.val_token_acc = token_accuracy(model, val_corpus, vocab, 9.0, cfg.seed + 17);
    result.curve.push_back(st);
    if (cfg.verbose)
      std::printf("epoch %2d  loss %.4f  val token acc %.4f\n", epoch, st.train_loss,
                  st.val_token_acc);
    if (st.val_token_acc > best_acc) {
      best_acc = st.val_token_acc;
      best_params.params = model.params.params;
      for (auto& [k, v] : best_params.params) v = v.clone();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (!best_params.params.empty()) model.params.params = best_params.params;
  result.best_val_acc = best_acc;
  return result;
}

std::vector<SnrBleuRow> evaluate_over_snr(JscdModel& model,
                                          const std::vector<std::string>& test_corpus,
                                          const Vocab& vocab,
                                          const std::vector<double>& snr_list_db, uint64_t seed,
                                          const std::string& variant_name) {
  std::vector<std::vector<int32_t>> references;
  std::vector<TokenSequence> tokenized;
  for (const auto& line : test_corpus) {
    TokenSequence seq = tokenize(line, vocab, model.cfg.max_len);
    tokenized.push_back(seq);
    references.emplace_back(seq.ids.begin() + 1, seq.ids.end() - 1);  // words only
  }
  std::vector<SnrBleuRow> rows;
  for (size_t si = 0; si < snr_list_db.size(); ++si) {
    double snr = snr_list_db[si];
    std::vector<std::vector<int32_t>> candidates;
    candidates.reserve(tokenized.size());
    for (size_t i = 0; i < tokenized.size(); ++i) {
      wenv::SymbolFrame tx = transmit_encode(model, tokenized[i]);
      uint64_t noise_seed = seed + 1000003ull * si + i;
      wenv::SymbolFrame rx = wenv::awgn_channel(tx, snr, noise_seed);
      TokenSequence dec = receive_decode(model, rx);
      candidates.emplace_back(dec.ids.begin() + 1,
                              dec.ids.end() - (dec.ids.back() == Vocab::kEnd ? 1 : 0));
    }
    SnrBleuRow row;
    row.variant = variant_name;
    row.snr_db = snr;
    row.bleu = corpus_bleu(candidates, references);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace jscd
