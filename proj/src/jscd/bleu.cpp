#include "jscd/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace jscd {

namespace {

using Ngram = std::vector<int32_t>;

std::map<Ngram, int64_t> ngram_counts(const std::vector<int32_t>& seq, int n) {
  std::map<Ngram, int64_t> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (size_t i = 0; i + n <= seq.size(); ++i)
    counts[Ngram(seq.begin() + i, seq.begin() + i + n)]++;
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::vector<int32_t>>& candidates,
                       const std::vector<std::vector<int32_t>>& references, int max_n) {
  if (candidates.empty() || references.empty())
    throw EmptyCorpusError("corpus_bleu: empty corpus");
  if (candidates.size() != references.size())
    throw std::invalid_argument("corpus_bleu: candidate/reference count mismatch");

  BleuReport r;
  r.precisions.assign(max_n, 0.0);
  std::vector<int64_t> clipped(max_n, 0), total(max_n, 0);
  for (size_t i = 0; i < candidates.size(); ++i) {
    r.candidate_len += static_cast<int64_t>(candidates[i].size());
    r.reference_len += static_cast<int64_t>(references[i].size());
    for (int n = 1; n <= max_n; ++n) {
      auto cand = ngram_counts(candidates[i], n);
      auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        total[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) clipped[n - 1] += std::min(count, it->second);
      }
    }
  }
  bool any_zero = false;
  for (int n = 0; n < max_n; ++n) {
    r.precisions[n] = total[n] > 0 ? double(clipped[n]) / double(total[n]) : 0.0;
    if (r.precisions[n] == 0.0) any_zero = true;
  }
  r.brevity_penalty =
      r.candidate_len >= r.reference_len || r.candidate_len == 0
          ? 1.0
          : std::exp(1.0 - double(r.reference_len) / double(r.candidate_len));
  if (any_zero) {
    r.bleu = 0.0;
    return r;
  }
  double log_sum = 0;
  for (int n = 0; n < max_n; ++n) log_sum += std::log(r.precisions[n]);
  r.bleu = r.brevity_penalty * std::exp(log_sum / max_n);
  return r;
}

}  // namespace jscd
