#include "histoner/scorer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "histoner/errors.hpp"
#include "json.hpp"

namespace histoner::scorer {

namespace {

bool overlaps(const ner::EntitySpan& a, const ner::EntitySpan& b) {
  return std::max(a.start, b.start) < std::min(a.end, b.end);
}

std::vector<ner::EntitySpan> sorted_spans(const ner::AnnotatedSentence& sentence) {
  std::vector<ner::EntitySpan> spans = ner::spans_from_iob(sentence).spans;
  std::sort(spans.begin(), spans.end());
  return spans;
}

void tally(const std::vector<ner::EntitySpan>& gold, const std::vector<ner::EntitySpan>& pred,
           const SentenceMatch& match, RegimeReport& report) {
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (match.gold_to_pred[g] >= 0) {
      report.micro.tp += 1;
      report.per_type[gold[g].type].tp += 1;
    } else {
      report.micro.fn += 1;
      report.per_type[gold[g].type].fn += 1;
    }
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (match.pred_to_gold[p] < 0) {
      report.micro.fp += 1;
      report.per_type[pred[p].type].fp += 1;
    }
  }
}

}  // namespace

SentenceMatch match_spans(const std::vector<ner::EntitySpan>& gold,
                          const std::vector<ner::EntitySpan>& pred, Regime regime) {
  SentenceMatch match;
  match.gold_to_pred.assign(gold.size(), -1);
  match.pred_to_gold.assign(pred.size(), -1);
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (match.pred_to_gold[p] >= 0) continue;
      if (gold[g].type != pred[p].type) continue;
      const bool hit = regime == Regime::strict
                           ? (gold[g].start == pred[p].start && gold[g].end == pred[p].end)
                           : overlaps(gold[g], pred[p]);
      if (hit) {
        match.gold_to_pred[g] = static_cast<int>(p);
        match.pred_to_gold[p] = static_cast<int>(g);
        break;
      }
    }
  }
  return match;
}

EvalReport score(const ner::Dataset& gold, const ner::Dataset& pred) {
  if (gold.size() != pred.size()) {
    throw DataError("gold has " + std::to_string(gold.size()) + " sentences, pred has " +
                    std::to_string(pred.size()));
  }
  EvalReport report;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens != pred[i].tokens) {
      throw DataError("sentence " + std::to_string(i) + ": tokenization mismatch");
    }
    const std::vector<ner::EntitySpan> g = sorted_spans(gold[i]);
    const std::vector<ner::EntitySpan> p = sorted_spans(pred[i]);
    report.gold_entities += g.size();
    report.pred_entities += p.size();
    tally(g, p, match_spans(g, p, Regime::strict), report.strict);
    tally(g, p, match_spans(g, p, Regime::fuzzy), report.fuzzy);
  }
  // Per-type maps list every type either side produced.
  for (auto& [type, counts] : report.strict.per_type) report.fuzzy.per_type[type];
  for (auto& [type, counts] : report.fuzzy.per_type) report.strict.per_type[type];
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "regime,type,precision,recall,f1,tp,fp,fn\n";
  char buf[160];
  const auto row = [&](const char* regime, const std::string& type, const Counts& c) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.1f,%.1f,%.1f,%llu,%llu,%llu\n", regime, type.c_str(),
                  100.0 * c.precision(), 100.0 * c.recall(), 100.0 * c.f1(),
                  static_cast<unsigned long long>(c.tp), static_cast<unsigned long long>(c.fp),
                  static_cast<unsigned long long>(c.fn));
    out << buf;
  };
  row("strict", "ALL", strict.micro);
  for (const auto& [type, counts] : strict.per_type) row("strict", type, counts);
  row("fuzzy", "ALL", fuzzy.micro);
  for (const auto& [type, counts] : fuzzy.per_type) row("fuzzy", type, counts);
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  const auto counts_json = [](const Counts& c) {
    nlohmann::ordered_json v;
    v["precision"] = c.precision();
    v["recall"] = c.recall();
    v["f1"] = c.f1();
    v["tp"] = c.tp;
    v["fp"] = c.fp;
    v["fn"] = c.fn;
    return v;
  };
  const auto regime_json = [&](const RegimeReport& r) {
    nlohmann::ordered_json v;
    v["micro"] = counts_json(r.micro);
    for (const auto& [type, counts] : r.per_type) v["per_type"][type] = counts_json(counts);
    return v;
  };
  j["strict"] = regime_json(strict);
  j["fuzzy"] = regime_json(fuzzy);
  j["gold_entities"] = gold_entities;
  j["pred_entities"] = pred_entities;
  return j.dump(2);
}

std::vector<DiffCell> report_diff(const EvalReport& a, const EvalReport& b) {
  std::vector<DiffCell> cells;
  const auto emit = [&](const std::string& regime, const std::string& type, const Counts& ca,
                        const Counts& cb) {
    DiffCell cell;
    cell.regime = regime;
    cell.type = type;
    cell.precision_pp = 100.0 * (ca.precision() - cb.precision());
    cell.recall_pp = 100.0 * (ca.recall() - cb.recall());
    cell.f1_pp = 100.0 * (ca.f1() - cb.f1());
    cells.push_back(std::move(cell));
  };
  const auto regime_cells = [&](const std::string& name, const RegimeReport& ra,
                                const RegimeReport& rb) {
    emit(name, "ALL", ra.micro, rb.micro);
    std::set<std::string> types;
    for (const auto& [t, c] : ra.per_type) types.insert(t);
    for (const auto& [t, c] : rb.per_type) types.insert(t);
    for (const std::string& t : types) {
      const Counts ca = ra.per_type.count(t) ? ra.per_type.at(t) : Counts{};
      const Counts cb = rb.per_type.count(t) ? rb.per_type.at(t) : Counts{};
      emit(name, t, ca, cb);
    }
  };
  regime_cells("strict", a.strict, b.strict);
  regime_cells("fuzzy", a.fuzzy, b.fuzzy);
  return cells;
}

}  // namespace histoner::scorer
