#include "histoner/wordpiece.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "histoner/errors.hpp"
#include "histoner/utf8.hpp"

namespace histoner::wordpiece {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) throw DataError("duplicate vocabulary token: " + tokens_[i]);
  }
  const char* expected[] = {kPad, kUnk, kCls, kSep, kMask};
  for (int i = 0; i < 5; ++i) {
    if (tokens_.size() <= static_cast<std::size_t>(i) || tokens_[i] != expected[i]) {
      throw DataError(std::string("special token ") + expected[i] + " missing at id " +
                      std::to_string(i));
    }
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // A trailing newline produces no extra entry; empty lines elsewhere are invalid.
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const std::string& token : tokens_) out << token << '\n';
}

int Vocab::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

bool Vocab::covers_char(char32_t cp, bool word_initial) const {
  std::string piece;
  if (!word_initial) piece = kContinuation;
  utf8::append(piece, cp);
  return contains(piece);
}

namespace {

// A word as a sequence of current symbols ("a", "##b", ...), weighted by
// its corpus frequency.
struct SegmentedWord {
  std::vector<std::string> symbols;
  std::uint64_t freq = 0;
};

std::string merge_symbols(const std::string& left, const std::string& right) {
  std::string merged = left;
  std::string_view r = right;
  if (r.substr(0, 2) == kContinuation) r.remove_prefix(2);
  merged += r;
  return merged;
}

}  // namespace

Vocab train_vocab(const std::vector<corpus::Document>& docs, const TrainOptions& options) {
  std::map<std::string, std::uint64_t> word_freq;
  for (const corpus::Document& doc : docs) {
    const std::string text =
        options.normalize_long_s ? utf8::normalize_long_s(doc.text) : doc.text;
    for (const std::string& word : utf8::pretokenize(text)) {
      word_freq[word] += 1;
    }
  }
  if (word_freq.empty()) throw DataError("cannot train a vocabulary on an empty corpus");

  std::vector<SegmentedWord> words;
  words.reserve(word_freq.size());
  std::map<std::string, std::uint64_t> alphabet;  // symbol -> occurrence count
  for (const auto& [word, freq] : word_freq) {
    SegmentedWord sw;
    sw.freq = freq;
    bool first = true;
    for (char32_t cp : utf8::decode(word)) {
      std::string sym;
      if (!first) sym = kContinuation;
      utf8::append(sym, cp);
      alphabet[sym] += freq;
      sw.symbols.push_back(std::move(sym));
      first = false;
    }
    words.push_back(std::move(sw));
  }

  std::vector<std::string> tokens = {kPad, kUnk, kCls, kSep, kMask};
  const std::size_t base = tokens.size() + alphabet.size();
  if (options.vocab_size < base) {
    throw UsageError("vocab_size " + std::to_string(options.vocab_size) +
                     " below alphabet+specials size " + std::to_string(base));
  }
  for (const auto& [sym, freq] : alphabet) tokens.push_back(sym);

  while (tokens.size() < options.vocab_size) {
    // Recount symbol and adjacent-pair frequencies from the current
    // segmentation; merges are rare enough at this scale that a full pass
    // per round keeps the bookkeeping trivially associative.
    std::map<std::string, std::uint64_t> sym_freq;
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_freq;
    for (const SegmentedWord& sw : words) {
      for (const std::string& sym : sw.symbols) sym_freq[sym] += sw.freq;
      for (std::size_t i = 0; i + 1 < sw.symbols.size(); ++i) {
        pair_freq[{sw.symbols[i], sw.symbols[i + 1]}] += sw.freq;
      }
    }

    bool found = false;
    double best_score = 0.0;
    std::pair<std::string, std::string> best_pair;
    std::string best_merged;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq < options.min_frequency) continue;
      const double score = static_cast<double>(freq) /
                           (static_cast<double>(sym_freq[pair.first]) *
                            static_cast<double>(sym_freq[pair.second]));
      const std::string merged = merge_symbols(pair.first, pair.second);
      if (!found || score > best_score ||
          (score == best_score &&
           std::tie(merged, pair.first) < std::tie(best_merged, best_pair.first))) {
        found = true;
        best_score = score;
        best_pair = pair;
        best_merged = merged;
      }
    }
    if (!found) break;  // no pair reaches min_frequency

    for (SegmentedWord& sw : words) {
      std::vector<std::string> merged;
      merged.reserve(sw.symbols.size());
      std::size_t i = 0;
      while (i < sw.symbols.size()) {
        if (i + 1 < sw.symbols.size() && sw.symbols[i] == best_pair.first &&
            sw.symbols[i + 1] == best_pair.second) {
          merged.push_back(best_merged);
          i += 2;
        } else {
          merged.push_back(sw.symbols[i]);
          i += 1;
        }
      }
      sw.symbols = std::move(merged);
    }
    tokens.push_back(best_merged);
  }

  return Vocab(std::move(tokens));
}

std::vector<std::string> Tokenizer::tokenize_word(std::string_view word) const {
  const std::string normalized =
      normalize_long_s ? utf8::normalize_long_s(word) : std::string(word);
  const std::vector<char32_t> cps = utf8::decode(normalized);
  if (cps.empty()) return {};
  if (max_chars_per_word > 0 && cps.size() > max_chars_per_word) return {kUnk};

  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string match;
    while (start < end) {
      std::string candidate;
      if (start > 0) candidate = kContinuation;
      for (std::size_t i = start; i < end; ++i) utf8::append(candidate, cps[i]);
      if (vocab->contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return {kUnk};  // unmatchable remainder
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  for (const std::string& word : utf8::pretokenize(text)) {
    const std::vector<std::string> pieces = tokenize_word(word);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& piece : tokenize(text)) {
    const int id = vocab->id_of(piece);
    ids.push_back(id >= 0 ? id : kUnkId);
  }
  return ids;
}

void TokenizerStats::merge(const TokenizerStats& other) {
  word_count += other.word_count;
  subword_count += other.subword_count;
  unk_count += other.unk_count;
}

std::string StatsReport::to_csv() const {
  std::ostringstream out;
  out << "language,sfr,unk_portion,words,subwords,unks\n";
  char buf[128];
  const auto row = [&](const std::string& language, const TokenizerStats& s) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.6f,%llu,%llu,%llu\n", language.c_str(), s.sfr(),
                  s.unk_portion(), static_cast<unsigned long long>(s.word_count),
                  static_cast<unsigned long long>(s.subword_count),
                  static_cast<unsigned long long>(s.unk_count));
    out << buf;
  };
  for (const auto& [language, stats] : per_language) row(language, stats);
  row("total", overall);
  return out.str();
}

StatsReport tokenizer_stats(const std::vector<corpus::Document>& docs,
                            const Tokenizer& tokenizer) {
  StatsReport report;
  for (const corpus::Document& doc : docs) {
    TokenizerStats stats;
    for (const std::string& word : utf8::pretokenize(doc.text)) {
      const std::vector<std::string> pieces = tokenizer.tokenize_word(word);
      if (pieces.empty()) continue;
      stats.word_count += 1;
      stats.subword_count += pieces.size();
      for (const std::string& piece : pieces) {
        if (piece == kUnk) stats.unk_count += 1;
      }
    }
    report.per_language[doc.language].merge(stats);
    report.overall.merge(stats);
  }
  if (report.overall.word_count == 0) {
    throw DataError("tokenizer stats need at least one word");
  }
  return report;
}

}  // namespace histoner::wordpiece
