#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histoner/ner.hpp"
#include "histoner/tagger.hpp"

namespace histoner::harness {

struct Grid {
  std::vector<int> batch_sizes;
  std::vector<int> epoch_counts;
  std::vector<double> learning_rates;
  std::vector<std::uint64_t> seeds;

  std::size_t run_count() const {
    return batch_sizes.size() * epoch_counts.size() * learning_rates.size() * seeds.size();
  }

  // bs {4,8,16}, 10 epochs, lr 1e-5..5e-5, seeds {1,2,4,5}.
  static Grid stage1_default();
  // bs {4,8}, epochs {5,10}, lr {3e-5,5e-5}, seeds {1,2,4,5}.
  static Grid stage2_default();
};

struct Cell {
  std::size_t index = 0;
  int batch_size = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
};

std::vector<Cell> enumerate_cells(const Grid& grid);

struct RunRecord {
  std::string run_id;
  int stage = 1;
  std::vector<std::string> languages;
  int batch_size = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double dev_f1 = 0.0;  // strict micro, percent
  std::string model_path;
  double wall_time_s = 0.0;
  std::string parent_run_id;            // stage-2 provenance
  std::uint64_t init_weights_fnv = 0;   // weights hash at step 0

  std::string to_json() const;
  static RunRecord from_json(const std::string& line, std::size_t line_no);
};

struct RunContext {
  const wordpiece::Tokenizer* tokenizer = nullptr;
  int jobs = 1;
  int hash_bits = 20;
  std::filesystem::path out_dir;  // when set: models/ and ledger.jsonl live here
  bool resume = false;            // skip cells already in the ledger
};

struct GridSearchResult {
  std::vector<RunRecord> ranked;  // dev F1 desc; ties by (epochs, batch, lr, seed)
  std::optional<tagger::TaggerModel> best_model;
};

// Trains every cell (failures are recorded, not skipped) and ranks the
// records. Cells run in parallel up to ctx.jobs; the ranking is computed
// from a deterministic gather and is independent of completion order.
GridSearchResult grid_search(const Grid& grid, const ner::Dataset& train,
                             const ner::Dataset& dev, const RunContext& ctx,
                             const std::string& run_prefix = "s1",
                             const tagger::TaggerModel* init = nullptr, int stage = 1,
                             const std::string& parent_run_id = {});

struct LanguageData {
  std::string language;
  ner::Dataset train;
  ner::Dataset dev;
};

struct CompareRow {
  std::string language;
  double single_f1 = 0.0;  // percent
  double one_model_f1 = 0.0;
  double delta_pp = 0.0;  // one_model - single
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::size_t single_run_count = 0;  // |languages| * |grid|
  std::size_t one_model_run_count = 0;
  std::vector<RunRecord> records;
  std::string to_json() const;
};

CompareReport compare_single_vs_one(const std::vector<LanguageData>& languages, const Grid& grid,
                                    const RunContext& ctx);

struct MultistageReport {
  RunRecord stage1_selected;
  std::map<std::string, double> stage1_per_language_f1;  // decoded per language
  std::map<std::string, RunRecord> stage2_selected;
  std::map<std::string, double> delta_pp;  // stage2 - stage1, per language
  std::vector<RunRecord> records;
  std::string to_json() const;
};

// Stage 1: grid search on the merged data over the concatenated dev sets;
// the best configuration is chosen by mean dev F1 over seeds, then its best
// seed. Stage 2: per-language grid search warm-started from the selected
// stage-1 model.
MultistageReport multistage(const Grid& stage1_grid, const Grid& stage2_grid,
                            const std::vector<LanguageData>& languages, const RunContext& ctx);

std::vector<RunRecord> read_ledger(const std::filesystem::path& path);

}  // namespace histoner::harness
