#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace histoner::ner {

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // IOB over the type inventory
  std::string language;
  std::string doc_id;
};

using Dataset = std::vector<AnnotatedSentence>;

// Half-open token range [start, end) of one entity.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  bool operator==(const EntitySpan&) const = default;
  auto operator<=>(const EntitySpan&) const = default;
};

struct HipeParseOptions {
  std::string label_column = "NE-COARSE-LIT";
  bool normalize_long_s = false;
  std::string language;  // used when the file carries no language comment
};

// Tab-separated HIPE-2022 format: header row naming columns, '#' comments,
// sentences split on blank lines or an EndOfSentence flag in MISC.
Dataset parse_hipe_tsv(const std::filesystem::path& path, const HipeParseOptions& options = {});

// Two-column `token<TAB>tag` with blank-line sentence breaks.
Dataset parse_conll(const std::filesystem::path& path, const std::string& language = "und",
                    bool normalize_long_s = false);

Dataset load_jsonl(const std::filesystem::path& path);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
AnnotatedSentence sentence_from_json(const std::string& line, std::size_t line_no);
std::string sentence_to_json(const AnnotatedSentence& sentence);

// Loads .tsv (HIPE), .conll, or .jsonl based on extension.
Dataset load_dataset(const std::filesystem::path& path, const std::string& label_column = "NE-COARSE-LIT",
                     bool normalize_long_s = false);

struct SpanExtraction {
  std::vector<EntitySpan> spans;
  std::size_t repairs = 0;  // orphan I-X upgraded to B-X
};

// Maximal B-X (I-X)* runs; orphan I-X is treated as B-X and counted.
SpanExtraction spans_from_iob(const AnnotatedSentence& sentence);

// Inverse of spans_from_iob on repair-free sentences. Spans must be
// disjoint and within bounds.
std::vector<std::string> iob_from_spans(std::size_t token_count,
                                        const std::vector<EntitySpan>& spans);

std::set<std::string> type_inventory(const Dataset& dataset);

struct MergeResult {
  Dataset dataset;
  std::vector<std::string> warnings;  // inventory differences
};

// Concatenates datasets, stably ordered by (language, doc_id). Differing
// type inventories merge to the union with a warning; strict_inventory
// turns the difference into an error instead.
MergeResult merge_multilingual(const std::vector<Dataset>& datasets,
                               bool strict_inventory = false);

}  // namespace histoner::ner
