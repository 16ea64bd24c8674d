#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histoner/ner.hpp"
#include "histoner/scorer.hpp"

namespace histoner::attr_eval {

// tCon/eCon: label consistency of a token / entity surface form in training.
// tFre/eFre: training frequency. eLen/sLen: token counts. oDen: fraction of
// sentence tokens unseen in training. eDen: fraction of sentence tokens
// inside gold entities.
enum class AttributeKind { tCon, eCon, tFre, eFre, eLen, sLen, oDen, eDen };

const std::vector<AttributeKind>& all_attribute_kinds();
std::string attribute_name(AttributeKind kind);
std::optional<AttributeKind> attribute_from_name(const std::string& name);
bool is_sentence_level(AttributeKind kind);  // sLen, oDen, eDen

struct TrainStatistics {
  std::map<std::string, std::map<std::string, std::uint64_t>> token_labels;
  std::map<std::string, std::uint64_t> token_counts;
  std::map<std::string, std::map<std::string, std::uint64_t>> entity_types;  // by surface form
  std::map<std::string, std::uint64_t> entity_counts;
};

TrainStatistics collect_train_statistics(const ner::Dataset& train);

double token_consistency(const TrainStatistics& stats, const std::string& token);
double entity_attribute(AttributeKind kind, const TrainStatistics& stats,
                        const ner::AnnotatedSentence& sentence, const ner::EntitySpan& span);
double sentence_attribute(AttributeKind kind, const TrainStatistics& stats,
                          const ner::AnnotatedSentence& sentence);

// Values per gold test entity (document order, then span order) for
// entity-level kinds; per sentence for sentence-level kinds.
std::vector<double> compute_attribute(AttributeKind kind, const ner::Dataset& train,
                                      const ner::Dataset& test);

struct Bucketing {
  std::vector<std::size_t> assignment;               // per value, bucket index
  std::vector<std::pair<double, double>> edges;      // attained (lo, hi) per bucket
  std::size_t requested = 0;
  bool collapsed = false;  // fewer distinct values than buckets
};

// Equal-frequency buckets over sorted order; ties go to the lower bucket so
// equal values never straddle an edge.
Bucketing bucketize(const std::vector<double>& values, std::size_t n_buckets);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& values);

// Tie-corrected Spearman: Pearson correlation of average ranks. Undefined
// (nullopt) when either side has fewer than 2 distinct values.
std::optional<double> spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Exact two-sided permutation test over orderings of y (n <= 8).
double permutation_p_value(const std::vector<double>& x, const std::vector<double>& y);

double population_stddev(const std::vector<double>& values);

struct BucketRow {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t count = 0;  // gold entities (or sentences) in the bucket
  scorer::Counts counts;    // strict counts restricted to the bucket
  double f1 = 0.0;          // fraction in [0,1]
  double mean_attribute = 0.0;
  bool has_gold = true;     // zero-gold buckets are flagged and excluded from rho
};

struct BucketReport {
  AttributeKind kind = AttributeKind::tCon;
  std::vector<BucketRow> buckets;
  bool rho_defined = false;
  double spearman = 0.0;
  double p_value = 1.0;
  bool significant = false;  // alpha = 0.05
  double f1_stddev = 0.0;
  bool collapsed = false;
};

struct ReportOptions {
  std::size_t n_buckets = 4;
  // Correlate raw per-entity values with per-entity strict correctness
  // instead of bucket means vs bucket F1s.
  bool raw_spearman = false;
};

BucketReport attribute_report(AttributeKind kind, const ner::Dataset& gold,
                              const ner::Dataset& pred, const ner::Dataset& train,
                              const ReportOptions& options = {});

// CSV `attribute,bucket,lo,hi,count,f1` over several reports.
std::string reports_to_csv(const std::vector<BucketReport>& reports);
std::string reports_to_json(const std::vector<BucketReport>& reports);

}  // namespace histoner::attr_eval
