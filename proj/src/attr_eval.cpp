#include "histoner/attr_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "histoner/errors.hpp"
#include "json.hpp"

namespace histoner::attr_eval {

const std::vector<AttributeKind>& all_attribute_kinds() {
  static const std::vector<AttributeKind> kinds = {
      AttributeKind::tCon, AttributeKind::eCon, AttributeKind::tFre, AttributeKind::eFre,
      AttributeKind::eLen, AttributeKind::sLen, AttributeKind::oDen, AttributeKind::eDen};
  return kinds;
}

std::string attribute_name(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::tCon: return "tCon";
    case AttributeKind::eCon: return "eCon";
    case AttributeKind::tFre: return "tFre";
    case AttributeKind::eFre: return "eFre";
    case AttributeKind::eLen: return "eLen";
    case AttributeKind::sLen: return "sLen";
    case AttributeKind::oDen: return "oDen";
    case AttributeKind::eDen: return "eDen";
  }
  return "?";
}

std::optional<AttributeKind> attribute_from_name(const std::string& name) {
  for (AttributeKind kind : all_attribute_kinds()) {
    if (attribute_name(kind) == name) return kind;
  }
  return std::nullopt;
}

bool is_sentence_level(AttributeKind kind) {
  return kind == AttributeKind::sLen || kind == AttributeKind::oDen ||
         kind == AttributeKind::eDen;
}

namespace {

std::string surface_form(const ner::AnnotatedSentence& sentence, const ner::EntitySpan& span) {
  std::string surface;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (!surface.empty()) surface.push_back(' ');
    surface += sentence.tokens[i];
  }
  return surface;
}

}  // namespace

TrainStatistics collect_train_statistics(const ner::Dataset& train) {
  TrainStatistics stats;
  for (const ner::AnnotatedSentence& sentence : train) {
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      stats.token_labels[sentence.tokens[i]][sentence.labels[i]] += 1;
      stats.token_counts[sentence.tokens[i]] += 1;
    }
    for (const ner::EntitySpan& span : ner::spans_from_iob(sentence).spans) {
      const std::string surface = surface_form(sentence, span);
      stats.entity_types[surface][span.type] += 1;
      stats.entity_counts[surface] += 1;
    }
  }
  return stats;
}

double token_consistency(const TrainStatistics& stats, const std::string& token) {
  const auto it = stats.token_labels.find(token);
  if (it == stats.token_labels.end()) return 0.0;
  std::uint64_t best = 0;
  std::uint64_t total = 0;
  for (const auto& [label, count] : it->second) {
    best = std::max(best, count);
    total += count;
  }
  return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
}

double entity_attribute(AttributeKind kind, const TrainStatistics& stats,
                        const ner::AnnotatedSentence& sentence, const ner::EntitySpan& span) {
  switch (kind) {
    case AttributeKind::tCon: {
      double sum = 0.0;
      for (std::size_t i = span.start; i < span.end; ++i) {
        sum += token_consistency(stats, sentence.tokens[i]);
      }
      return sum / static_cast<double>(span.end - span.start);
    }
    case AttributeKind::eCon: {
      const auto it = stats.entity_types.find(surface_form(sentence, span));
      if (it == stats.entity_types.end()) return 0.0;
      std::uint64_t best = 0;
      std::uint64_t total = 0;
      for (const auto& [type, count] : it->second) {
        best = std::max(best, count);
        total += count;
      }
      return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
    }
    case AttributeKind::tFre: {
      double sum = 0.0;
      for (std::size_t i = span.start; i < span.end; ++i) {
        const auto it = stats.token_counts.find(sentence.tokens[i]);
        sum += it == stats.token_counts.end() ? 0.0 : static_cast<double>(it->second);
      }
      return sum / static_cast<double>(span.end - span.start);
    }
    case AttributeKind::eFre: {
      const auto it = stats.entity_counts.find(surface_form(sentence, span));
      return it == stats.entity_counts.end() ? 0.0 : static_cast<double>(it->second);
    }
    case AttributeKind::eLen:
      return static_cast<double>(span.end - span.start);
    default:
      throw UsageError(attribute_name(kind) + " is a sentence-level attribute");
  }
}

double sentence_attribute(AttributeKind kind, const TrainStatistics& stats,
                          const ner::AnnotatedSentence& sentence) {
  const double n = static_cast<double>(sentence.tokens.size());
  switch (kind) {
    case AttributeKind::sLen:
      return n;
    case AttributeKind::oDen: {
      if (sentence.tokens.empty()) return 0.0;
      std::size_t unseen = 0;
      for (const std::string& token : sentence.tokens) {
        if (!stats.token_counts.count(token)) ++unseen;
      }
      return static_cast<double>(unseen) / n;
    }
    case AttributeKind::eDen: {
      if (sentence.tokens.empty()) return 0.0;
      std::size_t inside = 0;
      for (const ner::EntitySpan& span : ner::spans_from_iob(sentence).spans) {
        inside += span.end - span.start;
      }
      return static_cast<double>(inside) / n;
    }
    default:
      throw UsageError(attribute_name(kind) + " is an entity-level attribute");
  }
}

std::vector<double> compute_attribute(AttributeKind kind, const ner::Dataset& train,
                                      const ner::Dataset& test) {
  const TrainStatistics stats = collect_train_statistics(train);
  std::vector<double> values;
  for (const ner::AnnotatedSentence& sentence : test) {
    if (is_sentence_level(kind)) {
      values.push_back(sentence_attribute(kind, stats, sentence));
    } else {
      for (const ner::EntitySpan& span : ner::spans_from_iob(sentence).spans) {
        values.push_back(entity_attribute(kind, stats, sentence, span));
      }
    }
  }
  return values;
}

Bucketing bucketize(const std::vector<double>& values, std::size_t n_buckets) {
  if (n_buckets < 2) throw UsageError("need at least 2 buckets");
  if (values.empty()) throw UsageError("cannot bucketize an empty value list");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  const std::size_t n = values.size();
  Bucketing result;
  result.requested = n_buckets;
  result.assignment.assign(n, 0);

  // Ideal cut after floor(b*n/k) sorted values; a cut inside a tie run moves
  // forward so the run stays in the lower bucket.
  std::vector<std::size_t> cuts;
  std::size_t prev_cut = 0;
  for (std::size_t b = 1; b < n_buckets; ++b) {
    std::size_t cut = b * n / n_buckets;
    while (cut > 0 && cut < n && values[order[cut]] == values[order[cut - 1]]) ++cut;
    cut = std::max(cut, prev_cut);
    cuts.push_back(cut);
    prev_cut = cut;
  }

  std::size_t bucket = 0;
  std::vector<std::vector<std::size_t>> members(n_buckets);
  for (std::size_t pos = 0; pos < n; ++pos) {
    while (bucket < cuts.size() && pos >= cuts[bucket]) ++bucket;
    result.assignment[order[pos]] = bucket;
    members[bucket].push_back(order[pos]);
  }

  // Drop buckets emptied by tie collapse, renumbering densely.
  std::vector<std::size_t> remap(n_buckets, 0);
  std::size_t next = 0;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    if (members[b].empty()) continue;
    remap[b] = next++;
    double lo = values[members[b].front()];
    double hi = lo;
    for (std::size_t idx : members[b]) {
      lo = std::min(lo, values[idx]);
      hi = std::max(hi, values[idx]);
    }
    result.edges.emplace_back(lo, hi);
  }
  for (std::size_t i = 0; i < n; ++i) result.assignment[i] = remap[result.assignment[i]];
  result.collapsed = result.edges.size() < n_buckets;
  return result;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const std::size_t n = x.size();
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

double permutation_p_value(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() > 8) throw UsageError("exact permutation test limited to 8 buckets");
  const std::optional<double> observed = spearman_rho(x, y);
  if (!observed) return 1.0;
  std::vector<double> perm = y;
  std::sort(perm.begin(), perm.end());
  std::uint64_t total = 0;
  std::uint64_t at_least = 0;
  do {
    ++total;
    const std::optional<double> rho = spearman_rho(x, perm);
    if (rho && std::abs(*rho) >= std::abs(*observed) - 1e-12) ++at_least;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(at_least) / static_cast<double>(total);
}

double population_stddev(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                      static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

namespace {

// Bucket lookup by lower edges for values that were not part of the
// bucketing (unmatched predictions): last bucket whose lo <= value.
std::size_t bucket_for_value(const std::vector<std::pair<double, double>>& edges, double value) {
  std::size_t bucket = 0;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    if (value >= edges[b].first) bucket = b;
  }
  return bucket;
}

struct EntityRef {
  std::size_t sentence = 0;
  ner::EntitySpan span;
};

}  // namespace

BucketReport attribute_report(AttributeKind kind, const ner::Dataset& gold,
                              const ner::Dataset& pred, const ner::Dataset& train,
                              const ReportOptions& options) {
  if (gold.size() != pred.size()) {
    throw DataError("gold and pred must be sentence-aligned");
  }
  const TrainStatistics stats = collect_train_statistics(train);

  BucketReport report;
  report.kind = kind;

  // Gold-side values and strict matching per sentence.
  std::vector<EntityRef> gold_entities;
  std::vector<double> gold_values;
  std::vector<bool> gold_matched;
  std::vector<EntityRef> unmatched_preds;
  std::vector<double> sentence_values;

  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::vector<ner::EntitySpan> g = ner::spans_from_iob(gold[s]).spans;
    std::vector<ner::EntitySpan> p = ner::spans_from_iob(pred[s]).spans;
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    const scorer::SentenceMatch match = scorer::match_spans(g, p, scorer::Regime::strict);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gold_entities.push_back({s, g[i]});
      gold_matched.push_back(match.gold_to_pred[i] >= 0);
      if (!is_sentence_level(kind)) {
        gold_values.push_back(entity_attribute(kind, stats, gold[s], g[i]));
      }
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (match.pred_to_gold[i] < 0) unmatched_preds.push_back({s, p[i]});
    }
    if (is_sentence_level(kind)) {
      sentence_values.push_back(sentence_attribute(kind, stats, gold[s]));
    }
  }

  const std::vector<double>& unit_values = is_sentence_level(kind) ? sentence_values : gold_values;
  if (unit_values.empty()) {
    throw DataError("no " + std::string(is_sentence_level(kind) ? "sentences" : "gold entities") +
                    " to bucket");
  }
  const Bucketing bucketing = bucketize(unit_values, options.n_buckets);
  report.collapsed = bucketing.collapsed;
  const std::size_t n_buckets = bucketing.edges.size();
  report.buckets.resize(n_buckets);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    report.buckets[b].lo = bucketing.edges[b].first;
    report.buckets[b].hi = bucketing.edges[b].second;
  }

  std::vector<double> attr_sums(n_buckets, 0.0);
  if (is_sentence_level(kind)) {
    // Sentence buckets; every span inherits its sentence's bucket.
    std::vector<std::size_t> sentence_bucket = bucketing.assignment;
    for (std::size_t s = 0; s < sentence_values.size(); ++s) {
      BucketRow& row = report.buckets[sentence_bucket[s]];
      row.count += 1;
      attr_sums[sentence_bucket[s]] += sentence_values[s];
    }
    for (std::size_t e = 0; e < gold_entities.size(); ++e) {
      BucketRow& row = report.buckets[sentence_bucket[gold_entities[e].sentence]];
      if (gold_matched[e]) row.counts.tp += 1; else row.counts.fn += 1;
    }
    for (const EntityRef& ref : unmatched_preds) {
      report.buckets[sentence_bucket[ref.sentence]].counts.fp += 1;
    }
  } else {
    for (std::size_t e = 0; e < gold_entities.size(); ++e) {
      const std::size_t b = bucketing.assignment[e];
      BucketRow& row = report.buckets[b];
      row.count += 1;
      attr_sums[b] += gold_values[e];
      if (gold_matched[e]) row.counts.tp += 1; else row.counts.fn += 1;
    }
    // Unmatched predictions fall into the bucket of their own value.
    for (const EntityRef& ref : unmatched_preds) {
      const double value = entity_attribute(kind, stats, pred[ref.sentence], ref.span);
      report.buckets[bucket_for_value(bucketing.edges, value)].counts.fp += 1;
    }
  }

  std::vector<double> xs, ys;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    BucketRow& row = report.buckets[b];
    row.has_gold = row.counts.tp + row.counts.fn > 0;
    row.f1 = row.counts.f1();
    row.mean_attribute = row.count == 0 ? 0.0 : attr_sums[b] / static_cast<double>(row.count);
    if (row.has_gold) {
      xs.push_back(row.mean_attribute);
      ys.push_back(row.f1);
    }
  }

  if (options.raw_spearman && !is_sentence_level(kind)) {
    std::vector<double> correct(gold_matched.size());
    for (std::size_t i = 0; i < gold_matched.size(); ++i) correct[i] = gold_matched[i] ? 1.0 : 0.0;
    const std::optional<double> rho = spearman_rho(gold_values, correct);
    report.rho_defined = rho.has_value();
    if (rho) report.spearman = *rho;
    report.p_value = 1.0;  // exact permutation is bucket-level only
  } else {
    const std::optional<double> rho = spearman_rho(xs, ys);
    report.rho_defined = rho.has_value();
    if (rho) {
      report.spearman = *rho;
      report.p_value = permutation_p_value(xs, ys);
    }
  }
  report.significant = report.rho_defined && report.p_value <= 0.05;
  report.f1_stddev = population_stddev(ys);
  return report;
}

std::string reports_to_csv(const std::vector<BucketReport>& reports) {
  std::ostringstream out;
  out << "attribute,bucket,lo,hi,count,f1\n";
  char buf[160];
  for (const BucketReport& report : reports) {
    for (std::size_t b = 0; b < report.buckets.size(); ++b) {
      const BucketRow& row = report.buckets[b];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6g,%.6g,%llu,%.6f\n",
                    attribute_name(report.kind).c_str(), b, row.lo, row.hi,
                    static_cast<unsigned long long>(row.count), row.f1);
      out << buf;
    }
  }
  return out.str();
}

std::string reports_to_json(const std::vector<BucketReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const BucketReport& report : reports) {
    nlohmann::ordered_json r;
    r["attribute"] = attribute_name(report.kind);
    r["rho_defined"] = report.rho_defined;
    r["spearman"] = report.spearman;
    r["p_value"] = report.p_value;
    r["significant"] = report.significant;
    r["f1_stddev"] = report.f1_stddev;
    r["collapsed"] = report.collapsed;
    nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
    for (const BucketRow& row : report.buckets) {
      nlohmann::ordered_json b;
      b["lo"] = row.lo;
      b["hi"] = row.hi;
      b["count"] = row.count;
      b["f1"] = row.f1;
      b["mean_attribute"] = row.mean_attribute;
      b["tp"] = row.counts.tp;
      b["fp"] = row.counts.fp;
      b["fn"] = row.counts.fn;
      b["has_gold"] = row.has_gold;
      buckets.push_back(std::move(b));
    }
    r["buckets"] = std::move(buckets);
    j.push_back(std::move(r));
  }
  return j.dump(2);
}

}  // namespace histoner::attr_eval
