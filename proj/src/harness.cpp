#include "histoner/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "histoner/errors.hpp"
#include "histoner/scorer.hpp"
#include "json.hpp"

namespace histoner::harness {

Grid Grid::stage1_default() {
  Grid grid;
  grid.batch_sizes = {4, 8, 16};
  grid.epoch_counts = {10};
  grid.learning_rates = {1e-5, 2e-5, 3e-5, 4e-5, 5e-5};
  grid.seeds = {1, 2, 4, 5};
  return grid;
}

Grid Grid::stage2_default() {
  Grid grid;
  grid.batch_sizes = {4, 8};
  grid.epoch_counts = {5, 10};
  grid.learning_rates = {3e-5, 5e-5};
  grid.seeds = {1, 2, 4, 5};
  return grid;
}

std::vector<Cell> enumerate_cells(const Grid& grid) {
  if (grid.batch_sizes.empty() || grid.epoch_counts.empty() || grid.learning_rates.empty() ||
      grid.seeds.empty()) {
    throw UsageError("every grid axis needs at least one value");
  }
  std::vector<Cell> cells;
  cells.reserve(grid.run_count());
  std::size_t index = 0;
  for (const int bs : grid.batch_sizes) {
    for (const int ep : grid.epoch_counts) {
      for (const double lr : grid.learning_rates) {
        for (const std::uint64_t seed : grid.seeds) {
          cells.push_back({index++, bs, ep, lr, seed});
        }
      }
    }
  }
  return cells;
}

namespace {

std::string format_lr(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lr);
  return buf;
}

std::string cell_run_id(const std::string& prefix, const Cell& cell) {
  return prefix + "-bs" + std::to_string(cell.batch_size) + "-e" + std::to_string(cell.epochs) +
         "-lr" + format_lr(cell.learning_rate) + "-seed" + std::to_string(cell.seed);
}

// Failed runs sort after everything else.
bool record_less(const RunRecord& a, const RunRecord& b) {
  if (a.ok != b.ok) return a.ok;
  if (a.dev_f1 != b.dev_f1) return a.dev_f1 > b.dev_f1;
  if (a.epochs != b.epochs) return a.epochs < b.epochs;
  if (a.batch_size != b.batch_size) return a.batch_size < b.batch_size;
  if (a.learning_rate != b.learning_rate) return a.learning_rate < b.learning_rate;
  return a.seed < b.seed;
}

std::vector<std::string> dataset_languages(const ner::Dataset& dataset) {
  std::vector<std::string> languages;
  for (const ner::AnnotatedSentence& s : dataset) {
    if (std::find(languages.begin(), languages.end(), s.language) == languages.end()) {
      languages.push_back(s.language);
    }
  }
  std::sort(languages.begin(), languages.end());
  return languages;
}

}  // namespace

std::string RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["stage"] = stage;
  j["languages"] = languages;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  j["ok"] = ok;
  j["error"] = error;
  j["dev_f1"] = dev_f1;
  j["model_path"] = model_path;
  j["wall_time_s"] = wall_time_s;
  j["parent_run_id"] = parent_run_id;
  j["init_weights_fnv"] = init_weights_fnv;
  return j.dump();
}

RunRecord RunRecord::from_json(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("ledger line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.stage = j.at("stage").get<int>();
  r.languages = j.at("languages").get<std::vector<std::string>>();
  r.batch_size = j.at("batch_size").get<int>();
  r.epochs = j.at("epochs").get<int>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.value("error", "");
  r.dev_f1 = j.at("dev_f1").get<double>();
  r.model_path = j.value("model_path", "");
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.parent_run_id = j.value("parent_run_id", "");
  r.init_weights_fnv = j.value("init_weights_fnv", std::uint64_t{0});
  return r;
}

std::vector<RunRecord> read_ledger(const std::filesystem::path& path) {
  std::vector<RunRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    records.push_back(RunRecord::from_json(line, line_no));
  }
  return records;
}

GridSearchResult grid_search(const Grid& grid, const ner::Dataset& train,
                             const ner::Dataset& dev, const RunContext& ctx,
                             const std::string& run_prefix, const tagger::TaggerModel* init,
                             int stage, const std::string& parent_run_id) {
  const std::vector<Cell> cells = enumerate_cells(grid);
  const std::vector<std::string> languages = dataset_languages(train);

  std::map<std::string, RunRecord> completed;
  std::filesystem::path ledger_path;
  if (!ctx.out_dir.empty()) {
    std::filesystem::create_directories(ctx.out_dir / "models");
    ledger_path = ctx.out_dir / "ledger.jsonl";
    if (ctx.resume) {
      for (RunRecord& r : read_ledger(ledger_path)) {
        if (r.ok) completed[r.run_id] = std::move(r);
      }
    }
  }

  std::vector<RunRecord> records(cells.size());
  std::vector<std::optional<tagger::TaggerModel>> models(cells.size());
  std::mutex ledger_mutex;
  std::ofstream ledger;
  if (!ledger_path.empty()) ledger.open(ledger_path, std::ios::app);

  const auto run_cell = [&](std::size_t i) {
    const Cell& cell = cells[i];
    RunRecord record;
    record.run_id = cell_run_id(run_prefix, cell);
    record.stage = stage;
    record.languages = languages;
    record.batch_size = cell.batch_size;
    record.epochs = cell.epochs;
    record.learning_rate = cell.learning_rate;
    record.seed = cell.seed;
    record.parent_run_id = parent_run_id;

    if (const auto it = completed.find(record.run_id); it != completed.end()) {
      records[i] = it->second;
      return;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
      tagger::TrainConfig config;
      config.batch_size = cell.batch_size;
      config.epochs = cell.epochs;
      config.learning_rate = cell.learning_rate;
      config.seed = cell.seed;
      config.hash_bits = ctx.hash_bits;
      tagger::TrainResult result = tagger::train(config, train, dev, *ctx.tokenizer, init);
      record.ok = true;
      record.dev_f1 = result.dev_f1_history[static_cast<std::size_t>(result.best_epoch - 1)];
      record.init_weights_fnv = result.initial_weights_fnv;
      if (!ctx.out_dir.empty()) {
        const std::filesystem::path model_path =
            ctx.out_dir / "models" / (record.run_id + ".bin");
        result.model.save(model_path);
        record.model_path = model_path.string();
      }
      models[i] = std::move(result.model);
    } catch (const std::exception& e) {
      // Failed runs rank below every successful one; -1 keeps the ledger
      // JSON-serializable.
      record.ok = false;
      record.error = e.what();
      record.dev_f1 = -1.0;
    }
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records[i] = record;
    if (ledger.is_open()) {
      const std::scoped_lock lock(ledger_mutex);
      ledger << record.to_json() << '\n' << std::flush;
    }
  };

  const int jobs = std::max(1, ctx.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) break;
          run_cell(i);
        }
      });
    }
    for (std::thread& t : workers) t.join();
  }

  GridSearchResult result;
  result.ranked = records;
  std::sort(result.ranked.begin(), result.ranked.end(), record_less);
  if (!result.ranked.empty() && result.ranked.front().ok) {
    const std::string& best_id = result.ranked.front().run_id;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (records[i].run_id == best_id && models[i]) {
        result.best_model = std::move(models[i]);
        break;
      }
    }
    if (!result.best_model && !result.ranked.front().model_path.empty()) {
      result.best_model = tagger::TaggerModel::load(result.ranked.front().model_path);
    }
  }
  return result;
}

namespace {

double decode_f1_percent(const tagger::TaggerModel& model, const wordpiece::Tokenizer& tokenizer,
                         const ner::Dataset& dev) {
  const ner::Dataset decoded = tagger::predict(model, tokenizer, dev);
  return 100.0 * scorer::score(dev, decoded).strict.micro.f1();
}

ner::MergeResult merge_language_data(const std::vector<LanguageData>& languages, bool dev) {
  std::vector<ner::Dataset> parts;
  parts.reserve(languages.size());
  for (const LanguageData& l : languages) parts.push_back(dev ? l.dev : l.train);
  return ner::merge_multilingual(parts);
}

}  // namespace

CompareReport compare_single_vs_one(const std::vector<LanguageData>& languages, const Grid& grid,
                                    const RunContext& ctx) {
  if (languages.size() < 2) throw UsageError("single-vs-one comparison needs >= 2 languages");
  CompareReport report;
  report.single_run_count = languages.size() * grid.run_count();
  report.one_model_run_count = grid.run_count();

  std::map<std::string, double> single_f1;
  for (const LanguageData& lang : languages) {
    GridSearchResult result =
        grid_search(grid, lang.train, lang.dev, ctx, "single-" + lang.language);
    if (!result.best_model) {
      throw DataError("every single-model run failed for language " + lang.language);
    }
    single_f1[lang.language] = result.ranked.front().dev_f1;
    report.records.insert(report.records.end(), result.ranked.begin(), result.ranked.end());
  }

  const ner::Dataset merged_train = merge_language_data(languages, false).dataset;
  const ner::Dataset merged_dev = merge_language_data(languages, true).dataset;
  GridSearchResult one = grid_search(grid, merged_train, merged_dev, ctx, "one");
  if (!one.best_model) throw DataError("every one-model run failed");
  report.records.insert(report.records.end(), one.ranked.begin(), one.ranked.end());

  for (const LanguageData& lang : languages) {
    CompareRow row;
    row.language = lang.language;
    row.single_f1 = single_f1[lang.language];
    row.one_model_f1 = decode_f1_percent(*one.best_model, *ctx.tokenizer, lang.dev);
    row.delta_pp = row.one_model_f1 - row.single_f1;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string CompareReport::to_json() const {
  nlohmann::ordered_json j;
  j["single_run_count"] = single_run_count;
  j["one_model_run_count"] = one_model_run_count;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const CompareRow& row : rows) {
    nlohmann::ordered_json r;
    r["language"] = row.language;
    r["single_f1"] = row.single_f1;
    r["one_model_f1"] = row.one_model_f1;
    r["delta_pp"] = row.delta_pp;
    rows_json.push_back(std::move(r));
  }
  j["rows"] = std::move(rows_json);
  return j.dump(2);
}

MultistageReport multistage(const Grid& stage1_grid, const Grid& stage2_grid,
                            const std::vector<LanguageData>& languages, const RunContext& ctx) {
  if (languages.empty()) throw UsageError("multistage needs at least one language");

  const ner::Dataset merged_train = merge_language_data(languages, false).dataset;
  const ner::Dataset merged_dev = merge_language_data(languages, true).dataset;

  GridSearchResult stage1 = grid_search(stage1_grid, merged_train, merged_dev, ctx, "s1");
  if (!stage1.best_model) {
    throw DataError("stage 1 produced no usable model; aborting stage 2");
  }

  // Best configuration by mean dev F1 over seeds, then its best seed.
  struct ConfigKey {
    int batch_size;
    int epochs;
    double learning_rate;
    bool operator<(const ConfigKey& o) const {
      return std::tie(batch_size, epochs, learning_rate) <
             std::tie(o.batch_size, o.epochs, o.learning_rate);
    }
  };
  std::map<ConfigKey, std::vector<const RunRecord*>> by_config;
  for (const RunRecord& r : stage1.ranked) {
    if (r.ok) by_config[{r.batch_size, r.epochs, r.learning_rate}].push_back(&r);
  }
  const ConfigKey* best_config = nullptr;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (const auto& [config, runs] : by_config) {
    double mean = 0.0;
    for (const RunRecord* r : runs) mean += r->dev_f1;
    mean /= static_cast<double>(runs.size());
    if (best_config == nullptr || mean > best_mean) {
      best_config = &config;
      best_mean = mean;
    }
  }
  if (best_config == nullptr) throw DataError("no successful stage-1 run");
  const RunRecord* selected = nullptr;
  for (const RunRecord* r : by_config[*best_config]) {
    if (selected == nullptr || r->dev_f1 > selected->dev_f1 ||
        (r->dev_f1 == selected->dev_f1 && r->seed < selected->seed)) {
      selected = r;
    }
  }

  MultistageReport report;
  report.stage1_selected = *selected;
  report.records = stage1.ranked;

  tagger::TaggerModel stage1_model;
  if (selected->run_id == stage1.ranked.front().run_id && stage1.best_model) {
    stage1_model = std::move(*stage1.best_model);
  } else if (!selected->model_path.empty()) {
    stage1_model = tagger::TaggerModel::load(selected->model_path);
  } else {
    // Training is deterministic: re-running the selected cell reproduces
    // its weights bitwise.
    tagger::TrainConfig config;
    config.batch_size = selected->batch_size;
    config.epochs = selected->epochs;
    config.learning_rate = selected->learning_rate;
    config.seed = selected->seed;
    config.hash_bits = ctx.hash_bits;
    stage1_model = tagger::train(config, merged_train, merged_dev, *ctx.tokenizer).model;
  }

  for (const LanguageData& lang : languages) {
    report.stage1_per_language_f1[lang.language] =
        decode_f1_percent(stage1_model, *ctx.tokenizer, lang.dev);
  }

  for (const LanguageData& lang : languages) {
    GridSearchResult stage2 = grid_search(stage2_grid, lang.train, lang.dev, ctx,
                                          "s2-" + lang.language, &stage1_model, 2,
                                          report.stage1_selected.run_id);
    report.records.insert(report.records.end(), stage2.ranked.begin(), stage2.ranked.end());
    if (stage2.ranked.empty() || !stage2.ranked.front().ok) {
      throw DataError("every stage-2 run failed for language " + lang.language);
    }
    report.stage2_selected[lang.language] = stage2.ranked.front();
    report.delta_pp[lang.language] =
        stage2.ranked.front().dev_f1 - report.stage1_per_language_f1[lang.language];
  }
  return report;
}

std::string MultistageReport::to_json() const {
  nlohmann::ordered_json j;
  j["stage1_selected"] = nlohmann::ordered_json::parse(stage1_selected.to_json());
  for (const auto& [language, f1] : stage1_per_language_f1) {
    j["stage1_per_language_f1"][language] = f1;
  }
  for (const auto& [language, record] : stage2_selected) {
    j["stage2_selected"][language] = nlohmann::ordered_json::parse(record.to_json());
  }
  for (const auto& [language, delta] : delta_pp) {
    j["delta_pp"][language] = delta;
  }
  return j.dump(2);
}

}  // namespace histoner::harness
