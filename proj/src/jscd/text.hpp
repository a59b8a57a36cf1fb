#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace jscd {

struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic sentence corpus from a small template grammar: lowercase
/// words, one sentence per line, 4..24 words each.
std::vector<std::string> generate_corpus(int64_t sentences, uint64_t seed);

void save_corpus(const std::string& path, const std::vector<std::string>& lines);
std::vector<std::string> load_corpus(const std::string& path);

/// Word-level vocabulary with reserved ids 0..3.
class Vocab {
 public:
  static constexpr int32_t kPad = 0, kStart = 1, kEnd = 2, kUnk = 3;

  static Vocab build(const std::vector<std::string>& corpus, int64_t min_freq = 1);

  int64_t size() const { return static_cast<int64_t>(id_to_word_.size()); }
  int32_t id(const std::string& word) const;
  const std::string& word(int32_t id) const { return id_to_word_.at(id); }

 private:
  std::map<std::string, int32_t> word_to_id_;
  std::vector<std::string> id_to_word_;
};

struct TokenSequence {
  std::vector<int32_t> ids;  // includes start and end markers
};

/// Whitespace tokenizer: start marker, word ids (unk for OOV), end marker.
/// Truncates to `cap` ids, always keeping the end marker. Throws
/// EmptyInputError on an empty sentence.
TokenSequence tokenize(const std::string& text, const Vocab& vocab, int64_t cap = 36);

/// Inverse of tokenize for in-vocab sentences; unknown ids render as <unk>.
std::string detokenize(const TokenSequence& seq, const Vocab& vocab);

}  // namespace jscd
