#include "histoner/ner.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "histoner/errors.hpp"
#include "histoner/utf8.hpp"
#include "json.hpp"

namespace histoner::ner {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

// Pulls `key = value` out of a '#' comment line; empty when absent.
std::string comment_value(const std::string& comment, const std::string& key) {
  const std::size_t pos = comment.find(key);
  if (pos == std::string::npos) return "";
  const std::size_t eq = comment.find('=', pos + key.size());
  if (eq == std::string::npos) return "";
  return trim(comment.substr(eq + 1));
}

bool valid_iob(const std::string& label) {
  if (label == "O") return true;
  return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-';
}

}  // namespace

Dataset parse_hipe_tsv(const std::filesystem::path& path, const HipeParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  Dataset dataset;
  AnnotatedSentence current;
  current.language = options.language;
  std::string language = options.language;
  std::string doc_id = path.stem().string();

  std::vector<std::string> header;
  std::size_t token_col = 0;
  std::size_t label_col = 0;
  std::size_t misc_col = std::string::npos;
  bool header_seen = false;

  const auto flush = [&] {
    if (!current.tokens.empty()) {
      current.language = language.empty() ? "und" : language;
      current.doc_id = doc_id;
      dataset.push_back(std::move(current));
      current = AnnotatedSentence{};
    }
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string lang = comment_value(line, "language");
      if (!lang.empty()) language = lang;
      const std::string doc = comment_value(line, "document_id");
      if (!doc.empty()) {
        flush();
        doc_id = doc;
      }
      continue;
    }
    const std::vector<std::string> fields = split_tabs(line);
    if (!header_seen) {
      header = fields;
      const auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? std::string::npos
                                  : static_cast<std::size_t>(it - header.begin());
      };
      token_col = col("TOKEN");
      if (token_col == std::string::npos) {
        throw DataError(path.string() + ": header has no TOKEN column");
      }
      label_col = col(options.label_column);
      if (label_col == std::string::npos) {
        throw DataError(path.string() + ": header has no " + options.label_column + " column");
      }
      misc_col = col("MISC");
      header_seen = true;
      continue;
    }
    if (fields.size() <= std::max(token_col, label_col)) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(std::max(token_col, label_col) + 1) + " columns, got " +
                      std::to_string(fields.size()));
    }
    std::string token = fields[token_col];
    if (options.normalize_long_s) token = utf8::normalize_long_s(token);
    std::string label = trim(fields[label_col]);
    if (label.empty() || label == "_") label = "O";
    if (!valid_iob(label)) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed tag '" +
                      label + "'");
    }
    current.tokens.push_back(std::move(token));
    current.labels.push_back(std::move(label));
    if (misc_col != std::string::npos && misc_col < fields.size() &&
        fields[misc_col].find("EndOfSentence") != std::string::npos) {
      flush();
    }
  }
  flush();
  return dataset;
}

Dataset parse_conll(const std::filesystem::path& path, const std::string& language,
                    bool normalize_long_s) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset dataset;
  AnnotatedSentence current;
  const std::string doc_id = path.stem().string();
  const auto flush = [&] {
    if (!current.tokens.empty()) {
      current.language = language;
      current.doc_id = doc_id;
      dataset.push_back(std::move(current));
      current = AnnotatedSentence{};
    }
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 2) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": expected 2 tab-separated columns, got " + std::to_string(fields.size()));
    }
    std::string token = fields[0];
    if (normalize_long_s) token = utf8::normalize_long_s(token);
    std::string label = trim(fields[1]);
    if (!valid_iob(label)) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed tag '" +
                      label + "'");
    }
    current.tokens.push_back(std::move(token));
    current.labels.push_back(std::move(label));
  }
  flush();
  return dataset;
}

AnnotatedSentence sentence_from_json(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  AnnotatedSentence s;
  if (!j.contains("tokens") || !j.contains("labels")) {
    throw DataError("line " + std::to_string(line_no) + ": missing tokens/labels");
  }
  s.tokens = j["tokens"].get<std::vector<std::string>>();
  s.labels = j["labels"].get<std::vector<std::string>>();
  if (s.tokens.size() != s.labels.size()) {
    throw DataError("line " + std::to_string(line_no) + ": tokens/labels length mismatch");
  }
  if (j.contains("language")) s.language = j["language"].get<std::string>();
  if (j.contains("doc_id")) s.doc_id = j["doc_id"].get<std::string>();
  return s;
}

std::string sentence_to_json(const AnnotatedSentence& sentence) {
  nlohmann::ordered_json j;
  j["tokens"] = sentence.tokens;
  j["labels"] = sentence.labels;
  j["language"] = sentence.language;
  j["doc_id"] = sentence.doc_id;
  return j.dump();
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    dataset.push_back(sentence_from_json(line, line_no));
  }
  return dataset;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const AnnotatedSentence& s : dataset) out << sentence_to_json(s) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path, const std::string& label_column,
                     bool normalize_long_s) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return load_jsonl(path);
  if (ext == ".conll") return parse_conll(path, "und", normalize_long_s);
  HipeParseOptions options;
  options.label_column = label_column;
  options.normalize_long_s = normalize_long_s;
  return parse_hipe_tsv(path, options);
}

SpanExtraction spans_from_iob(const AnnotatedSentence& sentence) {
  SpanExtraction result;
  std::size_t i = 0;
  const std::size_t n = sentence.labels.size();
  while (i < n) {
    const std::string& label = sentence.labels[i];
    if (label == "O") {
      ++i;
      continue;
    }
    const std::string type = label.substr(2);
    if (label[0] == 'I') result.repairs += 1;  // orphan continuation
    std::size_t end = i + 1;
    while (end < n && sentence.labels[end] == "I-" + type) ++end;
    result.spans.push_back({i, end, type});
    i = end;
  }
  return result;
}

std::vector<std::string> iob_from_spans(std::size_t token_count,
                                        const std::vector<EntitySpan>& spans) {
  std::vector<std::string> labels(token_count, "O");
  for (const EntitySpan& span : spans) {
    if (span.start >= span.end || span.end > token_count) {
      throw DataError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                      ") out of bounds for " + std::to_string(token_count) + " tokens");
    }
    for (std::size_t i = span.start; i < span.end; ++i) {
      if (labels[i] != "O") throw DataError("overlapping spans at token " + std::to_string(i));
      labels[i] = (i == span.start ? "B-" : "I-") + span.type;
    }
  }
  return labels;
}

std::set<std::string> type_inventory(const Dataset& dataset) {
  std::set<std::string> types;
  for (const AnnotatedSentence& s : dataset) {
    for (const EntitySpan& span : spans_from_iob(s).spans) types.insert(span.type);
  }
  return types;
}

MergeResult merge_multilingual(const std::vector<Dataset>& datasets, bool strict_inventory) {
  MergeResult result;
  std::set<std::string> all_types;
  std::vector<std::set<std::string>> inventories;
  inventories.reserve(datasets.size());
  for (const Dataset& d : datasets) {
    inventories.push_back(type_inventory(d));
    all_types.insert(inventories.back().begin(), inventories.back().end());
  }
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    std::vector<std::string> missing;
    std::set_difference(all_types.begin(), all_types.end(), inventories[i].begin(),
                        inventories[i].end(), std::back_inserter(missing));
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "dataset " << i << " lacks types:";
      for (const std::string& t : missing) msg << ' ' << t;
      if (strict_inventory) throw DataError(msg.str());
      result.warnings.push_back(msg.str());
    }
  }
  for (const Dataset& d : datasets) {
    result.dataset.insert(result.dataset.end(), d.begin(), d.end());
  }
  std::stable_sort(result.dataset.begin(), result.dataset.end(),
                   [](const AnnotatedSentence& a, const AnnotatedSentence& b) {
                     return std::tie(a.language, a.doc_id) < std::tie(b.language, b.doc_id);
                   });
  return result;
}

}  // namespace histoner::ner
