#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histoner/ner.hpp"
#include "histoner/wordpiece.hpp"

namespace histoner::tagger {

inline constexpr const char* kFeatureSpecVersion = "feat-v1";

struct TrainConfig {
  int batch_size = 8;
  int epochs = 10;
  double learning_rate = 3e-5;
  std::uint64_t seed = 1;
  int hash_bits = 20;  // signed feature hashing into 2^hash_bits
};

// Feature strings for one token: first wordpiece (flagged), all wordpieces,
// surface, lowercased surface, shape, neighbor surfaces at +-1/+-2 with
// boundary sentinels, previous label.
std::vector<std::string> featurize(const ner::AnnotatedSentence& sentence, std::size_t position,
                                   const wordpiece::Tokenizer& tokenizer,
                                   const std::string& prev_label);

struct HashedFeature {
  std::uint32_t index = 0;
  double sign = 1.0;
};

std::vector<HashedFeature> hash_features(const std::vector<std::string>& names, int hash_bits);

struct SparseGrad {
  std::size_t index = 0;  // into the flattened label-major weight vector
  double value = 0.0;
};

// Per-example cross-entropy and (optionally) its analytic gradient, over a
// label-major flattened weight vector. The trainer and the
// finite-difference check both go through here.
double cross_entropy(std::span<const double> weights, std::size_t dim, std::size_t n_labels,
                     const std::vector<HashedFeature>& features, std::size_t gold_label,
                     std::vector<SparseGrad>* grad_out);

// lr at 0-based step t of total_steps; decays linearly to exactly 0 at the
// final step.
double learning_rate_at(double lr0, std::size_t step, std::size_t total_steps);

struct TaggerModel {
  std::vector<std::string> labels;  // sorted; index = class id
  int hash_bits = 20;
  std::string feature_spec = kFeatureSpecVersion;
  std::uint64_t vocab_fingerprint = 0;
  std::vector<double> weights;  // labels.size() << hash_bits, label-major

  // Training provenance.
  TrainConfig config;
  int best_epoch = 0;  // 1-based
  std::vector<double> dev_f1_history;  // strict micro F1 percent per epoch

  std::size_t dim() const { return std::size_t{1} << hash_bits; }
  std::uint64_t weights_fnv() const;

  void save(const std::filesystem::path& path) const;
  static TaggerModel load(const std::filesystem::path& path);
};

std::uint64_t vocab_fingerprint(const wordpiece::Vocab& vocab);

struct TrainResult {
  TaggerModel model;  // snapshot of the best epoch
  std::vector<double> dev_f1_history;
  int best_epoch = 0;  // 1-based
  std::vector<double> epoch1_batch_losses;
  std::uint64_t initial_weights_fnv = 0;
};

// Mini-batch multinomial logistic regression with one-cycle linear decay to
// zero, dev evaluation after every epoch, best checkpoint by dev strict
// micro F1 (ties keep the earlier epoch). Deterministic given the seed.
// init, when given, supplies the starting weights and label inventory.
TrainResult train(const TrainConfig& config, const ner::Dataset& train_set,
                  const ner::Dataset& dev_set, const wordpiece::Tokenizer& tokenizer,
                  const TaggerModel* init = nullptr);

// Greedy left-to-right decoding with the previous predicted label feature.
ner::Dataset predict(const TaggerModel& model, const wordpiece::Tokenizer& tokenizer,
                     const ner::Dataset& input);

}  // namespace histoner::tagger
