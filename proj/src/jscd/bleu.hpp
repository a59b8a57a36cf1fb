#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace jscd {

struct EmptyCorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BleuReport {
  double bleu = 0;                 // in [0,1]
  std::vector<double> precisions;  // clipped n-gram precisions, n = 1..max_n
  double brevity_penalty = 1.0;
  int64_t candidate_len = 0, reference_len = 0;
};

/// Corpus-level BLEU: clipped n-gram precision accumulated over the corpus,
/// geometric mean over n = 1..max_n, brevity penalty exp(1 - r/c) when c < r.
/// No smoothing: any zero precision gives BLEU 0.
BleuReport corpus_bleu(const std::vector<std::vector<int32_t>>& candidates,
                       const std::vector<std::vector<int32_t>>& references, int max_n = 4);

}  // namespace jscd
