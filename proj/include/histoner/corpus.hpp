#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace histoner::corpus {

// One OCR'd text unit. word_confidences, when present, holds one value in
// [0,1] per whitespace-separated word of text.
struct Document {
  std::string id;
  std::string language;              // ISO-639-1
  std::optional<int> year;
  std::string text;
  std::optional<std::vector<double>> word_confidences;

  std::uint64_t text_bytes() const { return text.size(); }
};

struct IngestError {
  std::size_t line = 0;  // 1-based; 0 when not line-addressable
  std::string message;
};

struct IngestResult {
  std::vector<Document> documents;  // sorted lexicographically by id
  std::vector<IngestError> errors;
};

enum class IngestFormat { jsonl, plaintext_dir };

IngestResult ingest(const std::filesystem::path& path, IngestFormat format);

Document parse_document_json(const std::string& line, std::size_t line_no);
std::string document_to_json(const Document& doc);

// Counts whitespace-separated words using the same classification the
// tokenizer's pre-split uses.
std::size_t word_count(const std::string& text);

enum class FilterUnit { document, word };

struct FilterReport {
  std::uint64_t input_bytes = 0;
  std::uint64_t kept_bytes = 0;      // bytes of confidence-scored text kept
  std::uint64_t dropped_bytes = 0;
  std::uint64_t unscored_bytes = 0;  // documents without confidences (kept)
  std::uint64_t kept_docs = 0;
  std::uint64_t dropped_docs = 0;
  std::uint64_t unscored_docs = 0;

  // Shard reports combine associatively.
  void merge(const FilterReport& other);
};

struct FilterResult {
  std::vector<Document> documents;
  FilterReport report;
};

// Keeps a document iff mean word confidence >= threshold. Documents without
// confidences are kept and tallied as unscored. FilterUnit::word instead
// drops individual words below the threshold and rebuilds the text.
FilterResult filter_by_confidence(const std::vector<Document>& docs, double threshold,
                                  FilterUnit unit = FilterUnit::document);

struct CorpusStats {
  std::map<int, std::uint64_t> chars_per_year;  // unicode scalar values
  std::uint64_t unknown_year_chars = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t doc_count = 0;

  void merge(const CorpusStats& other);
  // CSV with header `year,chars`; the unknown bucket emits a literal
  // "unknown" row after the numbered years.
  std::string to_csv() const;
};

CorpusStats chars_per_year(const std::vector<Document>& docs);

// Replication factor for concatenating a corpus up to target_bytes:
// ceil(target/corpus), minimum 1. Throws DataError when corpus_bytes is 0.
std::uint64_t upsample_factor(std::uint64_t corpus_bytes, std::uint64_t target_bytes);

std::vector<Document> upsample(const std::vector<Document>& docs, std::uint64_t factor);

struct BalanceRow {
  std::string language;
  std::uint64_t bytes = 0;
  double share = 0.0;
  bool flagged = false;  // |bytes - mean| / mean > ratio
};

struct BalanceReport {
  std::vector<BalanceRow> rows;  // sorted by language
  std::uint64_t total_bytes = 0;
  std::string to_csv() const;  // header `language,bytes,share`
};

BalanceReport balance_report(const std::map<std::string, std::uint64_t>& per_language_bytes,
                             double flag_ratio = 0.25);

}  // namespace histoner::corpus
