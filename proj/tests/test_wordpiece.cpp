#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "helpers.hpp"
#include "histoner/corpus.hpp"
#include "histoner/errors.hpp"
#include "histoner/io.hpp"
#include "histoner/rng.hpp"
#include "histoner/utf8.hpp"
#include "histoner/wordpiece.hpp"

using namespace histoner;
using test_helpers::TempDir;

namespace {

corpus::Document doc(const std::string& text, const std::string& lang = "de") {
  corpus::Document d;
  d.id = "d";
  d.language = lang;
  d.text = text;
  return d;
}

wordpiece::Vocab vocab_of(std::vector<std::string> extra) {
  std::vector<std::string> tokens = {wordpiece::kPad, wordpiece::kUnk, wordpiece::kCls,
                                     wordpiece::kSep, wordpiece::kMask};
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return wordpiece::Vocab(std::move(tokens));
}

std::string corpus_text(Rng& rng, int words) {
  static const char* pool[] = {"der", "die", "das", "haus", "hausbau", "bau",
                               "schiff", "schiffahrt", "zeit", "zeitung"};
  std::string text;
  for (int i = 0; i < words; ++i) {
    if (i) text += ' ';
    text += pool[rng.below(10)];
  }
  return text;
}

}  // namespace

TEST_CASE("one merge step on the ab corpus") {
  wordpiece::TrainOptions options;
  options.vocab_size = 8;
  const wordpiece::Vocab vocab = wordpiece::train_vocab({doc("ab ab ab")}, options);
  CHECK(vocab.size() == 8);
  CHECK(vocab.contains("a"));
  CHECK(vocab.contains("##b"));
  CHECK(vocab.contains("ab"));
  CHECK(vocab.id_of(wordpiece::kPad) == 0);
  CHECK(vocab.id_of(wordpiece::kMask) == 4);
}

TEST_CASE("alphabet-only budget produces no merges") {
  // Alphabet {a, ##b} plus 5 specials = 7.
  wordpiece::TrainOptions options;
  options.vocab_size = 7;
  const wordpiece::Vocab vocab = wordpiece::train_vocab({doc("ab ab ab")}, options);
  CHECK(vocab.size() == 7);
  CHECK_FALSE(vocab.contains("ab"));
}

TEST_CASE("vocab_size below alphabet plus specials is rejected") {
  wordpiece::TrainOptions options;
  options.vocab_size = 6;
  CHECK_THROWS_AS(wordpiece::train_vocab({doc("ab ab ab")}, options), UsageError);
  CHECK_THROWS_AS(wordpiece::train_vocab({doc("")}, options), DataError);
}

TEST_CASE("training is deterministic: byte-identical vocabulary files") {
  Rng rng(42);
  const std::string text = corpus_text(rng, 300);
  wordpiece::TrainOptions options;
  options.vocab_size = 64;
  const wordpiece::Vocab a = wordpiece::train_vocab({doc(text)}, options);
  const wordpiece::Vocab b = wordpiece::train_vocab({doc(text)}, options);
  TempDir tmp("vocab-det");
  a.save(tmp.path / "a.txt");
  b.save(tmp.path / "b.txt");
  CHECK(io::read_file(tmp.path / "a.txt") == io::read_file(tmp.path / "b.txt"));
  CHECK(a.tokens() == b.tokens());
}

TEST_CASE("vocabulary file round-trips through save and load") {
  wordpiece::TrainOptions options;
  options.vocab_size = 10;
  const wordpiece::Vocab trained = wordpiece::train_vocab({doc("abc abc cab")}, options);
  TempDir tmp("vocab-io");
  trained.save(tmp.path / "vocab.txt");
  const wordpiece::Vocab loaded = wordpiece::Vocab::load(tmp.path / "vocab.txt");
  CHECK(loaded.tokens() == trained.tokens());
}

TEST_CASE("greedy longest-match segmentation") {
  const wordpiece::Vocab vocab = vocab_of({"un", "##aff", "##able", "##a"});
  const wordpiece::Tokenizer tokenizer(vocab);
  const std::vector<std::string> expected = {"un", "##aff", "##able"};
  CHECK(tokenizer.tokenize_word("unaffable") == expected);
}

TEST_CASE("unmatchable first character maps the word to UNK") {
  const wordpiece::Vocab vocab = vocab_of({"ab", "a", "##b"});
  const wordpiece::Tokenizer tokenizer(vocab);
  CHECK(tokenizer.tokenize_word("xa") == std::vector<std::string>{wordpiece::kUnk});
  // Unmatchable remainder, not just first char.
  CHECK(tokenizer.tokenize_word("abx") == std::vector<std::string>{wordpiece::kUnk});
}

TEST_CASE("word exactly in vocab is one piece") {
  const wordpiece::Vocab vocab = vocab_of({"Ajax", "A", "##j"});
  const wordpiece::Tokenizer tokenizer(vocab);
  CHECK(tokenizer.tokenize_word("Ajax") == std::vector<std::string>{"Ajax"});
}

TEST_CASE("words over the length cap become UNK") {
  const wordpiece::Vocab vocab = vocab_of({"a", "##a"});
  wordpiece::Tokenizer tokenizer(vocab);
  tokenizer.max_chars_per_word = 5;
  CHECK(tokenizer.tokenize_word("aaaaa").size() == 5);
  CHECK(tokenizer.tokenize_word("aaaaaa") == std::vector<std::string>{wordpiece::kUnk});
}

TEST_CASE("round trip: stripped pieces concatenate to the word") {
  Rng rng(17);
  wordpiece::TrainOptions options;
  options.vocab_size = 80;
  const std::string text = corpus_text(rng, 400);
  const wordpiece::Vocab vocab = wordpiece::train_vocab({doc(text)}, options);
  const wordpiece::Tokenizer tokenizer(vocab);
  for (const std::string& word : utf8::pretokenize(text)) {
    const std::vector<std::string> pieces = tokenizer.tokenize_word(word);
    REQUIRE(!pieces.empty());
    if (pieces.size() == 1 && pieces[0] == wordpiece::kUnk) continue;
    std::string rebuilt = pieces[0];
    for (std::size_t i = 1; i < pieces.size(); ++i) rebuilt += pieces[i].substr(2);
    CHECK(rebuilt == word);
    // Greedy dominance: first piece is the longest vocabulary prefix.
    const auto cps = utf8::decode(word);
    for (std::size_t len = cps.size(); len > utf8::scalar_count(pieces[0]); --len) {
      std::string prefix;
      for (std::size_t i = 0; i < len; ++i) utf8::append(prefix, cps[i]);
      CHECK_FALSE(vocab.contains(prefix));
    }
  }
}

TEST_CASE("trainer keeps case distinctions") {
  wordpiece::TrainOptions options;
  options.vocab_size = 16;
  const wordpiece::Vocab vocab = wordpiece::train_vocab({doc("Die die Die die")}, options);
  CHECK(vocab.contains("D"));
  CHECK(vocab.contains("d"));
  const wordpiece::Tokenizer tokenizer(vocab);
  CHECK(tokenizer.tokenize_word("Die") != tokenizer.tokenize_word("die"));
}

TEST_CASE("tokenizer stats on the two-word fixture") {
  const wordpiece::Vocab vocab = vocab_of({"eins", "zw", "##ei"});
  const wordpiece::Tokenizer tokenizer(vocab);
  const wordpiece::StatsReport report = wordpiece::tokenizer_stats({doc("eins zwei")}, tokenizer);
  CHECK(report.overall.word_count == 2);
  CHECK(report.overall.subword_count == 3);
  CHECK(report.overall.sfr() == doctest::Approx(1.5));
  CHECK(report.overall.unk_portion() == 0.0);
}

TEST_CASE("one UNK out of four subwords gives portion 0.25") {
  const wordpiece::Vocab vocab = vocab_of({"aa", "bb", "##bb"});
  const wordpiece::Tokenizer tokenizer(vocab);
  // "aa" -> 1, "bbbb" -> 2, "xx" -> UNK; total 4 subwords.
  const wordpiece::StatsReport report =
      wordpiece::tokenizer_stats({doc("aa bbbb xx")}, tokenizer);
  CHECK(report.overall.subword_count == 4);
  CHECK(report.overall.unk_count == 1);
  CHECK(report.overall.unk_portion() == doctest::Approx(0.25));
}

TEST_CASE("stats break down per language") {
  const wordpiece::Vocab vocab = vocab_of({"a", "##a", "b", "##b"});
  const wordpiece::Tokenizer tokenizer(vocab);
  const wordpiece::StatsReport report =
      wordpiece::tokenizer_stats({doc("aa", "de"), doc("b b b", "fr")}, tokenizer);
  REQUIRE(report.per_language.count("de"));
  REQUIRE(report.per_language.count("fr"));
  CHECK(report.per_language.at("de").sfr() == doctest::Approx(2.0));
  CHECK(report.per_language.at("fr").sfr() == doctest::Approx(1.0));
  const std::string csv = report.to_csv();
  CHECK(csv.rfind("language,sfr,unk_portion,words,subwords,unks\n", 0) == 0);
  CHECK(csv.find("total,") != std::string::npos);
}

TEST_CASE("empty dataset is a stats error") {
  const wordpiece::Vocab vocab = vocab_of({"a"});
  const wordpiece::Tokenizer tokenizer(vocab);
  CHECK_THROWS_AS(wordpiece::tokenizer_stats({}, tokenizer), DataError);
}

TEST_CASE("sfr is at least 1 and unk_portion 0 when the alphabet is covered") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::string text = corpus_text(rng, 120);
    wordpiece::TrainOptions options;
    options.vocab_size = 40 + rng.below(40);
    const wordpiece::Vocab vocab = wordpiece::train_vocab({doc(text)}, options);
    wordpiece::Tokenizer tokenizer(vocab);
    tokenizer.max_chars_per_word = 0;  // cap disabled
    const wordpiece::StatsReport report = wordpiece::tokenizer_stats({doc(text)}, tokenizer);
    CHECK(report.overall.sfr() >= 1.0);
    // Training corpus alphabet is in the vocab by construction.
    CHECK(report.overall.unk_count == 0);
  }
}

TEST_CASE("growing the trained vocabulary never worsens SFR on its corpus") {
  // Pinned corpora: nested trainer vocabularies on the training corpus.
  Rng rng(31);
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Rng local(seed);
    const std::string text = corpus_text(local, 250);
    double previous_sfr = 1e9;
    for (const std::size_t size : {24, 32, 48, 64}) {
      wordpiece::TrainOptions options;
      options.vocab_size = size;
      const wordpiece::Vocab vocab = wordpiece::train_vocab({doc(text)}, options);
      const wordpiece::Tokenizer tokenizer(vocab);
      const double sfr = wordpiece::tokenizer_stats({doc(text)}, tokenizer).overall.sfr();
      CHECK(sfr <= previous_sfr + 1e-12);
      previous_sfr = sfr;
    }
  }
  (void)rng;
}

TEST_CASE("long-s handling stays upstream unless opted in") {
  // Vocabulary trained on normalized text cannot segment raw long-s words.
  wordpiece::TrainOptions options;
  options.vocab_size = 32;
  options.normalize_long_s = true;
  const wordpiece::Vocab vocab =
      wordpiece::train_vocab({doc("waſſer waſſer wasser fluſs")}, options);
  wordpiece::Tokenizer raw(vocab);
  const wordpiece::StatsReport before =
      wordpiece::tokenizer_stats({doc("waſſer fluſs")}, raw);
  CHECK(before.overall.unk_portion() > 0.0);

  wordpiece::Tokenizer fixed(vocab);
  fixed.normalize_long_s = true;  // the opt-in in-tokenizer fix
  const wordpiece::StatsReport after =
      wordpiece::tokenizer_stats({doc("waſſer fluſs")}, fixed);
  CHECK(after.overall.unk_count == 0);
}
