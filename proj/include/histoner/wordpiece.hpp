#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "histoner/corpus.hpp"

namespace histoner::wordpiece {

inline constexpr const char* kPad = "[PAD]";
inline constexpr const char* kUnk = "[UNK]";
inline constexpr const char* kCls = "[CLS]";
inline constexpr const char* kSep = "[SEP]";
inline constexpr const char* kMask = "[MASK]";
inline constexpr const char* kContinuation = "##";

enum SpecialId : int { kPadId = 0, kUnkId = 1, kClsId = 2, kSepId = 3, kMaskId = 4 };

// Ordered cased subword inventory; index in tokens == id. Specials occupy
// ids 0..4; every other entry is a word-initial piece or starts with "##".
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab load(const std::filesystem::path& path);
  // One token per line, line index = id.
  void save(const std::filesystem::path& path) const;

  int id_of(std::string_view token) const;  // -1 when absent
  bool contains(std::string_view token) const { return id_of(token) >= 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Single-character inventory: word-initial code points and "##"-prefixed
  // continuation code points present in the vocabulary.
  bool covers_char(char32_t cp, bool word_initial) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct TrainOptions {
  std::size_t vocab_size = 32000;
  std::uint64_t min_frequency = 2;  // merge eligibility; alphabet always included
  bool normalize_long_s = false;    // opt-in upstream fix baked into the trainer
};

// Pair-merge trainer over word frequency counts with
// score(x, y) = freq(xy) / (freq(x) * freq(y)), ties broken lexicographically.
// Deterministic given corpus content and options.
Vocab train_vocab(const std::vector<corpus::Document>& docs, const TrainOptions& options);

struct Tokenizer {
  const Vocab* vocab = nullptr;
  std::size_t max_chars_per_word = 100;  // longer words map to UNK
  bool normalize_long_s = false;

  explicit Tokenizer(const Vocab& v) : vocab(&v) {}

  // Greedy longest-match-first segmentation of one word (no pre-split).
  std::vector<std::string> tokenize_word(std::string_view word) const;
  // Whitespace+punctuation pre-split, then per-word segmentation.
  std::vector<std::string> tokenize(std::string_view text) const;
  std::vector<int> encode(std::string_view text) const;
};

struct TokenizerStats {
  std::uint64_t word_count = 0;
  std::uint64_t subword_count = 0;
  std::uint64_t unk_count = 0;

  double sfr() const {
    return word_count == 0 ? 0.0
                           : static_cast<double>(subword_count) / static_cast<double>(word_count);
  }
  double unk_portion() const {
    return subword_count == 0
               ? 0.0
               : static_cast<double>(unk_count) / static_cast<double>(subword_count);
  }
  void merge(const TokenizerStats& other);
};

struct StatsReport {
  TokenizerStats overall;
  std::map<std::string, TokenizerStats> per_language;
  // CSV `language,sfr,unk_portion,words,subwords,unks`; ends with a "total" row.
  std::string to_csv() const;
};

// Throws DataError on an empty dataset (no words at all).
StatsReport tokenizer_stats(const std::vector<corpus::Document>& docs, const Tokenizer& tokenizer);

}  // namespace histoner::wordpiece
