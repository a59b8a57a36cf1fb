#include "jscd/text.hpp"

#include <fstream>
#include <sstream>

namespace jscd {

namespace {

const std::vector<std::string> kDets = {"the", "a", "this", "that", "every", "some", "each"};

const std::vector<std::string> kAdjs = {
    "quick", "bright", "calm",   "heavy",  "narrow", "wide",  "quiet",  "loud",
    "early", "late",   "warm",   "cold",   "clean",  "smooth", "rough", "sharp",
    "strong", "weak",  "tall",   "short",  "long",   "small", "large",  "young",
    "old",   "fresh",  "dry",    "wet",    "busy",   "empty", "full",   "dark",
    "pale",  "rare",   "common", "simple", "steady", "silent", "distant", "broken"};

const std::vector<std::string> kNouns = {
    "river",    "mountain", "village", "city",    "road",    "bridge",  "garden",
    "forest",   "field",    "window",  "door",    "table",   "chair",   "letter",
    "book",     "story",    "song",    "voice",   "market",  "harbor",  "island",
    "valley",   "stone",    "tower",   "castle",  "train",   "station", "engine",
    "driver",   "teacher",  "doctor",  "farmer",  "sailor",  "soldier", "painter",
    "writer",   "child",    "friend",  "neighbor", "stranger", "morning", "evening",
    "winter",   "summer",   "autumn",  "shadow",  "lantern", "candle",  "mirror",
    "basket",   "bottle",   "ribbon",  "jacket",  "pocket",  "ladder",  "roof",
    "cellar",   "kitchen",  "meadow",  "orchard", "horse",   "rabbit",  "pigeon",
    "sparrow",  "spider",   "beetle",  "maple",   "willow",  "cedar",   "clover",
    "thunder",  "breeze",   "puddle",  "pebble",  "ember",   "lake",    "wagon",
    "miller",   "baker",    "anchor",  "compass"};

const std::vector<std::string> kVerbs = {
    "crossed",  "climbed",  "entered",   "reached",  "followed", "watched",  "found",
    "lost",     "carried",  "opened",    "closed",   "painted",  "repaired", "visited",
    "remembered", "forgot", "described", "studied",  "counted",  "gathered", "scattered",
    "borrowed", "returned", "promised",  "refused",  "offered",  "accepted", "guarded",
    "ignored",  "noticed",  "admired",   "avoided",  "approached", "measured", "weighed",
    "lifted",   "dropped",  "folded",    "polished", "covered",  "filled",   "emptied",
    "washed",   "dried",    "shared",    "traded",   "sketched", "passed",   "left"};

const std::vector<std::string> kPreps = {"near",    "beside",  "behind",  "beyond",
                                         "under",   "above",   "across",  "along",
                                         "inside",  "outside", "toward",  "against"};

const std::vector<std::string> kAdvs = {"slowly",   "quickly", "quietly",  "carefully",
                                        "suddenly", "gently",  "rarely",   "often",
                                        "finally",  "almost",  "patiently", "twice"};

const std::vector<std::string> kConjs = {"and", "while", "but", "because", "before", "after"};

struct Grammar {
  std::mt19937_64 rng;
  explicit Grammar(uint64_t seed) : rng(seed) {}

  const std::string& pick(const std::vector<std::string>& v) {
    return v[rng() % v.size()];
  }
  bool chance(double p) {
    return std::uniform_real_distribution<double>(0, 1)(rng) < p;
  }

  void noun_phrase(std::vector<std::string>& out) {
    out.push_back(pick(kDets));
    if (chance(0.45)) out.push_back(pick(kAdjs));
    if (chance(0.12)) out.push_back(pick(kAdjs));
    out.push_back(pick(kNouns));
  }

  void prep_phrase(std::vector<std::string>& out) {
    out.push_back(pick(kPreps));
    noun_phrase(out);
  }

  void clause(std::vector<std::string>& out) {
    noun_phrase(out);
    out.push_back(pick(kVerbs));
    double r = std::uniform_real_distribution<double>(0, 1)(rng);
    if (r < 0.35) {
      noun_phrase(out);
      if (chance(0.3)) prep_phrase(out);
    } else if (r < 0.65) {
      prep_phrase(out);
    } else if (r < 0.85) {
      noun_phrase(out);
      out.push_back(pick(kAdvs));
    } else {
      out.push_back(pick(kAdvs));
    }
  }

  std::string sentence() {
    for (int attempt = 0; attempt < 16; ++attempt) {
      std::vector<std::string> words;
      clause(words);
      if (chance(0.42)) {
        words.push_back(pick(kConjs));
        clause(words);
      }
      if (chance(0.15)) {
        words.push_back(pick(kConjs));
        clause(words);
      }
      if (words.size() >= 4 && words.size() <= 24) {
        std::string s;
        for (size_t i = 0; i < words.size(); ++i) {
          if (i) s += ' ';
          s += words[i];
        }
        return s;
      }
    }
    return "the quiet river crossed the valley";
  }
};

}  // namespace

std::vector<std::string> generate_corpus(int64_t sentences, uint64_t seed) {
  Grammar g(seed);
  std::vector<std::string> out;
  out.reserve(sentences);
  for (int64_t i = 0; i < sentences; ++i) out.push_back(g.sentence());
  return out;
}

void save_corpus(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write corpus: " + path);
  for (const auto& l : lines) os << l << '\n';
}

std::vector<std::string> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read corpus: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int64_t min_freq) {
  std::map<std::string, int64_t> freq;
  for (const auto& line : corpus) {
    std::istringstream is(line);
    std::string w;
    while (is >> w) freq[w]++;
  }
  Vocab v;
  v.id_to_word_ = {"<pad>", "<start>", "<end>", "<unk>"};
  for (const auto& [w, f] : freq) {
    if (f < min_freq) continue;
    v.word_to_id_[w] = static_cast<int32_t>(v.id_to_word_.size());
    v.id_to_word_.push_back(w);
  }
  return v;
}

int32_t Vocab::id(const std::string& word) const {
  auto it = word_to_id_.find(word);
  return it != word_to_id_.end() ? it->second : kUnk;
}

TokenSequence tokenize(const std::string& text, const Vocab& vocab, int64_t cap) {
  std::istringstream is(text);
  std::string w;
  TokenSequence seq;
  seq.ids.push_back(Vocab::kStart);
  while (is >> w) seq.ids.push_back(vocab.id(w));
  if (seq.ids.size() == 1) throw EmptyInputError("tokenize: empty sentence");
  seq.ids.push_back(Vocab::kEnd);
  if (static_cast<int64_t>(seq.ids.size()) > cap) {
    seq.ids.resize(cap);
    seq.ids.back() = Vocab::kEnd;
  }
  return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocab& vocab) {
  std::string out;
  for (int32_t id : seq.ids) {
    if (id == Vocab::kStart || id == Vocab::kPad) continue;
    if (id == Vocab::kEnd) break;
    if (!out.empty()) out += ' ';
    out += id >= 0 && id < vocab.size() ? vocab.word(id) : "<unk>";
  }
  return out;
}

}  // namespace jscd
