#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "helpers.hpp"
#include "histoner/corpus.hpp"
#include "histoner/errors.hpp"
#include "histoner/rng.hpp"
#include "histoner/utf8.hpp"

using namespace histoner;
using test_helpers::TempDir;
using test_helpers::write_file;

namespace {

corpus::Document doc(const std::string& id, const std::string& text,
                     std::optional<std::vector<double>> confs = std::nullopt,
                     std::optional<int> year = std::nullopt, const std::string& lang = "de") {
  corpus::Document d;
  d.id = id;
  d.language = lang;
  d.text = text;
  d.word_confidences = std::move(confs);
  d.year = year;
  return d;
}

}  // namespace

TEST_CASE("utf8 scalar count and pretokenize") {
  CHECK(utf8::scalar_count("abc") == 3);
  CHECK(utf8::scalar_count("Waſſer") == 6);  // long s is one scalar, two bytes
  CHECK(utf8::scalar_count("") == 0);

  const auto words = utf8::pretokenize("Hallo, Welt! ſchön");
  REQUIRE(words.size() == 5);
  CHECK(words[0] == "Hallo");
  CHECK(words[1] == ",");
  CHECK(words[2] == "Welt");
  CHECK(words[3] == "!");
  CHECK(words[4] == "ſchön");
}

TEST_CASE("normalize_long_s substitutes exactly U+017F and is idempotent") {
  CHECK(utf8::normalize_long_s("Waſſer") == "Wasser");
  CHECK(utf8::normalize_long_s("kein Sonderzeichen") == "kein Sonderzeichen");
  CHECK(utf8::normalize_long_s("") == "");

  // Only U+017F changes; every other code point survives byte-identically.
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<char32_t> cps;
    const std::size_t len = rng.below(40);
    for (std::size_t i = 0; i < len; ++i) {
      switch (rng.below(4)) {
        case 0: cps.push_back(static_cast<char32_t>('a' + rng.below(26))); break;
        case 1: cps.push_back(utf8::kLongS); break;
        case 2: cps.push_back(0x00E4); break;  // ä
        case 3: cps.push_back(0x4E16); break;  // CJK
      }
    }
    const std::string text = utf8::encode(cps);
    const std::string normalized = utf8::normalize_long_s(text);
    CHECK(utf8::normalize_long_s(normalized) == normalized);
    const auto out = utf8::decode(normalized);
    REQUIRE(out.size() == cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) {
      if (cps[i] == utf8::kLongS) {
        CHECK(out[i] == U's');
      } else {
        CHECK(out[i] == cps[i]);
      }
    }
  }
}

TEST_CASE("jsonl ingestion yields documents sorted by id") {
  TempDir tmp("ingest");
  write_file(tmp.path / "corpus.jsonl",
             R"({"id":"b","language":"de","text":"zwei Worte"})"
             "\n"
             R"({"id":"a","language":"fr","text":"bonjour"})"
             "\n");
  const corpus::IngestResult result = corpus::ingest(tmp.path / "corpus.jsonl",
                                                     corpus::IngestFormat::jsonl);
  CHECK(result.errors.empty());
  REQUIRE(result.documents.size() == 2);
  CHECK(result.documents[0].id == "a");
  CHECK(result.documents[1].id == "b");
}

TEST_CASE("ingestion reports malformed records with line numbers") {
  TempDir tmp("ingest-bad");
  write_file(tmp.path / "corpus.jsonl",
             R"({"id":"a","language":"de","text":"zwei Worte","word_confidences":[0.9]})"
             "\n"
             R"({"id":"b","language":"de","text":"ok"})"
             "\n"
             R"({"id":"c","language":"de"})"
             "\n");
  const corpus::IngestResult result = corpus::ingest(tmp.path / "corpus.jsonl",
                                                     corpus::IngestFormat::jsonl);
  REQUIRE(result.documents.size() == 1);
  CHECK(result.documents[0].id == "b");
  REQUIRE(result.errors.size() == 2);
  CHECK(result.errors[0].line == 1);  // confidence count != word count
  CHECK(result.errors[0].message.find("confidence count") != std::string::npos);
  CHECK(result.errors[1].line == 3);  // missing text
}

TEST_CASE("empty file ingests to empty stream with zero errors") {
  TempDir tmp("ingest-empty");
  write_file(tmp.path / "corpus.jsonl", "");
  const corpus::IngestResult result = corpus::ingest(tmp.path / "corpus.jsonl",
                                                     corpus::IngestFormat::jsonl);
  CHECK(result.documents.empty());
  CHECK(result.errors.empty());
}

TEST_CASE("unreadable path raises a data error") {
  CHECK_THROWS_AS(corpus::ingest("/nonexistent/nowhere.jsonl", corpus::IngestFormat::jsonl),
                  DataError);
}

TEST_CASE("plaintext directory ingestion takes ids from filenames") {
  TempDir tmp("ingest-dir");
  write_file(tmp.path / "b.txt", "second text");
  write_file(tmp.path / "a.txt", "first text");
  const corpus::IngestResult result =
      corpus::ingest(tmp.path, corpus::IngestFormat::plaintext_dir);
  REQUIRE(result.documents.size() == 2);
  CHECK(result.documents[0].id == "a");
  CHECK(result.documents[1].text == "second text");
}

TEST_CASE("confidence filter keeps documents at or above the mean threshold") {
  const std::vector<corpus::Document> docs = {
      doc("a", "w w", std::vector<double>{0.5, 0.5}),
      doc("b", "w w", std::vector<double>{0.6, 0.7}),
      doc("c", "w w", std::vector<double>{0.9, 0.9}),
  };
  const corpus::FilterResult result = corpus::filter_by_confidence(docs, 0.60);
  REQUIRE(result.documents.size() == 2);
  CHECK(result.documents[0].id == "b");
  CHECK(result.documents[1].id == "c");
  CHECK(result.report.kept_docs == 2);
  CHECK(result.report.dropped_docs == 1);
}

TEST_CASE("threshold zero keeps everything") {
  const std::vector<corpus::Document> docs = {
      doc("a", "x", std::vector<double>{0.01}),
      doc("b", "y", std::vector<double>{0.99}),
  };
  CHECK(corpus::filter_by_confidence(docs, 0.0).documents.size() == 2);
}

TEST_CASE("documents without confidences are kept and tallied separately") {
  const std::vector<corpus::Document> docs = {
      doc("a", "no confidences here"),
      doc("b", "w", std::vector<double>{0.1}),
  };
  const corpus::FilterResult result = corpus::filter_by_confidence(docs, 0.9);
  REQUIRE(result.documents.size() == 1);
  CHECK(result.documents[0].id == "a");
  CHECK(result.report.unscored_docs == 1);
  CHECK(result.report.unscored_bytes == docs[0].text_bytes());
}

TEST_CASE("filter byte conservation and monotone shrinkage") {
  Rng rng(99);
  std::vector<corpus::Document> docs;
  for (int i = 0; i < 120; ++i) {
    const std::size_t words = 1 + rng.below(12);
    std::string text;
    std::vector<double> confs;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += "w" + std::to_string(rng.below(1000));
      confs.push_back(static_cast<double>(rng.below(101)) / 100.0);
    }
    const bool scored = rng.below(10) != 0;
    docs.push_back(doc("d" + std::to_string(i), text,
                       scored ? std::optional(confs) : std::nullopt));
  }
  std::uint64_t input_bytes = 0;
  for (const auto& d : docs) input_bytes += d.text_bytes();

  std::uint64_t previous_kept = input_bytes + 1;
  for (const double threshold : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    for (const corpus::FilterUnit unit :
         {corpus::FilterUnit::document, corpus::FilterUnit::word}) {
      const corpus::FilterResult result = corpus::filter_by_confidence(docs, threshold, unit);
      CHECK(result.report.input_bytes == input_bytes);
      CHECK(result.report.kept_bytes + result.report.dropped_bytes +
                result.report.unscored_bytes ==
            input_bytes);
    }
    const corpus::FilterResult result = corpus::filter_by_confidence(docs, threshold);
    CHECK(result.report.kept_bytes <= previous_kept);
    previous_kept = result.report.kept_bytes;
  }
}

TEST_CASE("filter reports merge associatively") {
  Rng rng(5);
  std::vector<corpus::Document> docs;
  for (int i = 0; i < 30; ++i) {
    docs.push_back(doc("d" + std::to_string(i), "a b c",
                       std::vector<double>{rng.next_double(), rng.next_double(),
                                           rng.next_double()}));
  }
  const corpus::FilterReport whole = corpus::filter_by_confidence(docs, 0.5).report;
  // Shard at an arbitrary cut and merge.
  const std::vector<corpus::Document> left(docs.begin(), docs.begin() + 11);
  const std::vector<corpus::Document> right(docs.begin() + 11, docs.end());
  corpus::FilterReport merged = corpus::filter_by_confidence(left, 0.5).report;
  merged.merge(corpus::filter_by_confidence(right, 0.5).report);
  CHECK(merged.kept_bytes == whole.kept_bytes);
  CHECK(merged.dropped_bytes == whole.dropped_bytes);
  CHECK(merged.unscored_bytes == whole.unscored_bytes);
  CHECK(merged.kept_docs == whole.kept_docs);
}

TEST_CASE("word-unit filtering drops individual words") {
  const std::vector<corpus::Document> docs = {
      doc("a", "gut schlecht gut", std::vector<double>{0.9, 0.1, 0.8}),
  };
  const corpus::FilterResult result =
      corpus::filter_by_confidence(docs, 0.5, corpus::FilterUnit::word);
  REQUIRE(result.documents.size() == 1);
  CHECK(result.documents[0].text == "gut gut");
  CHECK(result.documents[0].word_confidences->size() == 2);
}

TEST_CASE("chars_per_year counts unicode scalars per year") {
  const std::string hundred(100, 'x');
  const corpus::CorpusStats one = corpus::chars_per_year({doc("a", hundred, {}, 1890)});
  REQUIRE(one.chars_per_year.count(1890));
  CHECK(one.chars_per_year.at(1890) == 100);

  const corpus::CorpusStats two =
      corpus::chars_per_year({doc("a", hundred, {}, 1890), doc("b", "abc", {}, 1890)});
  CHECK(two.chars_per_year.at(1890) == 103);

  const corpus::CorpusStats unknown = corpus::chars_per_year({doc("a", "Waſſer")});
  CHECK(unknown.unknown_year_chars == 6);
  CHECK(unknown.chars_per_year.empty());
  CHECK(unknown.total_bytes == 8);  // each long s is two bytes
}

TEST_CASE("histogram additivity over disjoint streams") {
  Rng rng(13);
  std::vector<corpus::Document> a, b;
  for (int i = 0; i < 25; ++i) {
    auto d = doc("a" + std::to_string(i), std::string(1 + rng.below(50), 'q'), {},
                 rng.below(3) == 0 ? std::nullopt : std::optional<int>(1800 + rng.below(40)));
    (i % 2 ? a : b).push_back(d);
  }
  std::vector<corpus::Document> both = a;
  both.insert(both.end(), b.begin(), b.end());
  corpus::CorpusStats merged = corpus::chars_per_year(a);
  merged.merge(corpus::chars_per_year(b));
  const corpus::CorpusStats whole = corpus::chars_per_year(both);
  CHECK(merged.chars_per_year == whole.chars_per_year);
  CHECK(merged.unknown_year_chars == whole.unknown_year_chars);
  CHECK(merged.total_bytes == whole.total_bytes);
  CHECK(merged.doc_count == whole.doc_count);
}

TEST_CASE("histogram csv has the year,chars header and unknown row") {
  const corpus::CorpusStats stats =
      corpus::chars_per_year({doc("a", "ab", {}, 1900), doc("b", "xyz")});
  const std::string csv = stats.to_csv();
  CHECK(csv == "year,chars\n1900,2\nunknown,3\n");
}

TEST_CASE("upsample factor is the ceiling ratio with minimum 1") {
  const std::uint64_t gb = 1000000000ULL;
  CHECK(corpus::upsample_factor(1 * gb, 10 * gb) == 10);
  CHECK(corpus::upsample_factor(3 * gb, 10 * gb) == 4);
  CHECK(corpus::upsample_factor(10 * gb, 10 * gb) == 1);
  CHECK(corpus::upsample_factor(20 * gb, 10 * gb) == 1);
  CHECK_THROWS_AS(corpus::upsample_factor(0, gb), DataError);
}

TEST_CASE("upsampled stream repeats the document sequence in order") {
  const std::vector<corpus::Document> docs = {doc("a", "one"), doc("b", "two")};
  const std::vector<corpus::Document> upsampled = corpus::upsample(docs, 3);
  REQUIRE(upsampled.size() == 6);
  std::uint64_t bytes = 0;
  for (std::size_t i = 0; i < upsampled.size(); ++i) {
    CHECK(upsampled[i].id == docs[i % 2].id);
    bytes += upsampled[i].text_bytes();
  }
  CHECK(bytes == 3 * (docs[0].text_bytes() + docs[1].text_bytes()));
}

TEST_CASE("balance report totals the five-language corpus sizes") {
  // 28+27+24+27+27 = 133; the total is the arithmetic sum of the rows.
  const std::uint64_t gb = 1000000000ULL;
  const corpus::BalanceReport report = corpus::balance_report(
      {{"de", 28 * gb}, {"fr", 27 * gb}, {"en", 24 * gb}, {"fi", 27 * gb}, {"sv", 27 * gb}});
  CHECK(report.total_bytes == 133 * gb);
  std::uint64_t sum = 0;
  for (const corpus::BalanceRow& row : report.rows) {
    CHECK_FALSE(row.flagged);
    sum += row.bytes;
  }
  CHECK(report.total_bytes == sum);
}

TEST_CASE("single language gets share 1.0") {
  const corpus::BalanceReport report = corpus::balance_report({{"de", 123}});
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].share == doctest::Approx(1.0));
}

TEST_CASE("extreme imbalance flags both languages at ratio 0.5") {
  const corpus::BalanceReport report = corpus::balance_report({{"a", 1}, {"b", 100}}, 0.5);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].flagged);
  CHECK(report.rows[1].flagged);
}
