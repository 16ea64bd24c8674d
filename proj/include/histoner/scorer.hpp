#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "histoner/ner.hpp"

namespace histoner::scorer {

enum class Regime { strict, fuzzy };

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  double precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  void merge(const Counts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
  }
};

struct RegimeReport {
  Counts micro;
  std::map<std::string, Counts> per_type;
};

struct EvalReport {
  RegimeReport strict;
  RegimeReport fuzzy;
  std::uint64_t gold_entities = 0;
  std::uint64_t pred_entities = 0;

  // CSV `regime,type,precision,recall,f1,tp,fp,fn`; micro rows use type "ALL".
  // Scores formatted as percentages with one decimal.
  std::string to_csv() const;
  std::string to_json() const;
};

// Strict: exact (start, end, type), one-to-one. Fuzzy: type match plus >=1
// token overlap, gold spans in reading order matched to the first unmatched
// overlapping prediction. Requires sentence-aligned inputs with identical
// tokenization; throws DataError naming the first mismatch.
EvalReport score(const ner::Dataset& gold, const ner::Dataset& pred);

// Matching for one sentence; exposed for bucketed evaluation.
struct SentenceMatch {
  std::vector<int> gold_to_pred;  // index into pred spans, -1 when unmatched
  std::vector<int> pred_to_gold;
};
SentenceMatch match_spans(const std::vector<ner::EntitySpan>& gold,
                          const std::vector<ner::EntitySpan>& pred, Regime regime);

struct DiffCell {
  std::string regime;
  std::string type;  // "ALL" for micro
  double precision_pp = 0.0;
  double recall_pp = 0.0;
  double f1_pp = 0.0;
};

// Per-cell differences in percentage points, sign convention a - b.
std::vector<DiffCell> report_diff(const EvalReport& a, const EvalReport& b);

}  // namespace histoner::scorer
