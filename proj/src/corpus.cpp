#include "histoner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "histoner/errors.hpp"
#include "histoner/utf8.hpp"
#include "json.hpp"

namespace histoner::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t word_count(const std::string& text) {
  return utf8::split_whitespace(text).size();
}

Document parse_document_json(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  const auto require_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string()) {
      throw DataError("line " + std::to_string(line_no) + ": missing or non-string field '" +
                      key + "'");
    }
    return j[key].get<std::string>();
  };
  Document doc;
  doc.id = require_string("id");
  doc.language = require_string("language");
  doc.text = require_string("text");
  if (j.contains("year") && !j["year"].is_null()) {
    if (!j["year"].is_number_integer()) {
      throw DataError("line " + std::to_string(line_no) + ": field 'year' must be an integer");
    }
    doc.year = j["year"].get<int>();
  }
  if (j.contains("word_confidences") && !j["word_confidences"].is_null()) {
    if (!j["word_confidences"].is_array()) {
      throw DataError("line " + std::to_string(line_no) + ": field 'word_confidences' must be an array");
    }
    std::vector<double> confs;
    confs.reserve(j["word_confidences"].size());
    for (const auto& v : j["word_confidences"]) {
      if (!v.is_number()) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric confidence");
      }
      const double c = v.get<double>();
      if (c < 0.0 || c > 1.0) {
        throw DataError("line " + std::to_string(line_no) + ": confidence " +
                        std::to_string(c) + " outside [0,1]");
      }
      confs.push_back(c);
    }
    const std::size_t words = word_count(doc.text);
    if (confs.size() != words) {
      throw DataError("line " + std::to_string(line_no) + ": confidence count " +
                      std::to_string(confs.size()) + " != word count " + std::to_string(words));
    }
    doc.word_confidences = std::move(confs);
  }
  return doc;
}

std::string document_to_json(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["language"] = doc.language;
  if (doc.year) j["year"] = *doc.year;
  j["text"] = doc.text;
  if (doc.word_confidences) j["word_confidences"] = *doc.word_confidences;
  return j.dump();
}

namespace {

IngestResult ingest_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      result.documents.push_back(parse_document_json(line, line_no));
    } catch (const DataError& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  return result;
}

IngestResult ingest_plaintext_dir(const fs::path& path) {
  if (!fs::is_directory(path)) throw DataError(path.string() + " is not a directory");
  IngestResult result;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path());
    if (!in) {
      result.errors.push_back({0, "cannot open " + entry.path().string()});
      continue;
    }
    std::ostringstream body;
    body << in.rdbuf();
    Document doc;
    doc.id = entry.path().stem().string();
    doc.language = "und";  // plaintext carries no metadata
    doc.text = body.str();
    result.documents.push_back(std::move(doc));
  }
  return result;
}

}  // namespace

IngestResult ingest(const fs::path& path, IngestFormat format) {
  IngestResult result = format == IngestFormat::jsonl ? ingest_jsonl(path)
                                                      : ingest_plaintext_dir(path);
  std::sort(result.documents.begin(), result.documents.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  return result;
}

void FilterReport::merge(const FilterReport& other) {
  input_bytes += other.input_bytes;
  kept_bytes += other.kept_bytes;
  dropped_bytes += other.dropped_bytes;
  unscored_bytes += other.unscored_bytes;
  kept_docs += other.kept_docs;
  dropped_docs += other.dropped_docs;
  unscored_docs += other.unscored_docs;
}

FilterResult filter_by_confidence(const std::vector<Document>& docs, double threshold,
                                  FilterUnit unit) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw UsageError("threshold must be in [0,1]");
  }
  FilterResult result;
  for (const Document& doc : docs) {
    result.report.input_bytes += doc.text_bytes();
    if (!doc.word_confidences || doc.word_confidences->empty()) {
      result.report.unscored_bytes += doc.text_bytes();
      result.report.unscored_docs += 1;
      result.documents.push_back(doc);
      continue;
    }
    const std::vector<double>& confs = *doc.word_confidences;
    if (unit == FilterUnit::document) {
      const double mean = std::accumulate(confs.begin(), confs.end(), 0.0) /
                          static_cast<double>(confs.size());
      if (mean >= threshold) {
        result.report.kept_bytes += doc.text_bytes();
        result.report.kept_docs += 1;
        result.documents.push_back(doc);
      } else {
        result.report.dropped_bytes += doc.text_bytes();
        result.report.dropped_docs += 1;
      }
    } else {
      const std::vector<std::string> words = utf8::split_whitespace(doc.text);
      Document kept = doc;
      kept.text.clear();
      std::vector<double> kept_confs;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (confs[i] >= threshold) {
          if (!kept.text.empty()) kept.text.push_back(' ');
          kept.text += words[i];
          kept_confs.push_back(confs[i]);
        }
      }
      kept.word_confidences = std::move(kept_confs);
      result.report.kept_bytes += kept.text_bytes();
      result.report.dropped_bytes += doc.text_bytes() - std::min<std::uint64_t>(
          kept.text_bytes(), doc.text_bytes());
      if (!kept.text.empty()) {
        result.report.kept_docs += 1;
        result.documents.push_back(std::move(kept));
      } else {
        result.report.dropped_docs += 1;
      }
    }
  }
  return result;
}

void CorpusStats::merge(const CorpusStats& other) {
  for (const auto& [year, chars] : other.chars_per_year) chars_per_year[year] += chars;
  unknown_year_chars += other.unknown_year_chars;
  total_bytes += other.total_bytes;
  doc_count += other.doc_count;
}

std::string CorpusStats::to_csv() const {
  std::ostringstream out;
  out << "year,chars\n";
  for (const auto& [year, chars] : chars_per_year) {
    out << year << ',' << chars << '\n';
  }
  if (unknown_year_chars > 0) {
    out << "unknown," << unknown_year_chars << '\n';
  }
  return out.str();
}

CorpusStats chars_per_year(const std::vector<Document>& docs) {
  CorpusStats stats;
  for (const Document& doc : docs) {
    const std::uint64_t chars = utf8::scalar_count(doc.text);
    if (doc.year) {
      stats.chars_per_year[*doc.year] += chars;
    } else {
      stats.unknown_year_chars += chars;
    }
    stats.total_bytes += doc.text_bytes();
    stats.doc_count += 1;
  }
  return stats;
}

std::uint64_t upsample_factor(std::uint64_t corpus_bytes, std::uint64_t target_bytes) {
  if (corpus_bytes == 0) throw DataError("cannot upsample an empty corpus");
  if (target_bytes <= corpus_bytes) return 1;
  return (target_bytes + corpus_bytes - 1) / corpus_bytes;
}

std::vector<Document> upsample(const std::vector<Document>& docs, std::uint64_t factor) {
  std::vector<Document> out;
  out.reserve(docs.size() * factor);
  for (std::uint64_t i = 0; i < factor; ++i) {
    out.insert(out.end(), docs.begin(), docs.end());
  }
  return out;
}

std::string BalanceReport::to_csv() const {
  std::ostringstream out;
  out << "language,bytes,share\n";
  char buf[64];
  for (const BalanceRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.share);
    out << row.language << ',' << row.bytes << ',' << buf << '\n';
  }
  return out.str();
}

BalanceReport balance_report(const std::map<std::string, std::uint64_t>& per_language_bytes,
                             double flag_ratio) {
  if (per_language_bytes.empty()) throw UsageError("balance report needs at least one language");
  BalanceReport report;
  for (const auto& [lang, bytes] : per_language_bytes) report.total_bytes += bytes;
  const double mean = static_cast<double>(report.total_bytes) /
                      static_cast<double>(per_language_bytes.size());
  for (const auto& [lang, bytes] : per_language_bytes) {
    BalanceRow row;
    row.language = lang;
    row.bytes = bytes;
    row.share = report.total_bytes == 0
                    ? 0.0
                    : static_cast<double>(bytes) / static_cast<double>(report.total_bytes);
    row.flagged = mean > 0.0 &&
                  std::abs(static_cast<double>(bytes) - mean) / mean > flag_ratio;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace histoner::corpus
