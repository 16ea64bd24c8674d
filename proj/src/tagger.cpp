#include "histoner/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "histoner/errors.hpp"
#include "histoner/rng.hpp"
#include "histoner/scorer.hpp"
#include "histoner/utf8.hpp"

namespace histoner::tagger {

namespace {

constexpr const char* kBosToken = "<S>";
constexpr const char* kEosToken = "</S>";
constexpr const char* kStartLabel = "<START>";

bool latin_upper(char32_t cp) {
  return (cp >= U'A' && cp <= U'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7);
}

bool latin_lower(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= 0xDF && cp <= 0xFF && cp != 0xF7);
}

std::string lowercase(const std::string& token) {
  std::string out;
  for (char32_t cp : utf8::decode(token)) {
    if (latin_upper(cp)) cp += 0x20;
    utf8::append(out, cp);
  }
  return out;
}

std::string shape(const std::string& token) {
  std::string s;
  for (char32_t cp : utf8::decode(token)) {
    if (latin_upper(cp)) s += 'X';
    else if (latin_lower(cp)) s += 'x';
    else if (cp >= U'0' && cp <= U'9') s += '9';
    else s += '#';
  }
  return s;
}

}  // namespace

std::vector<std::string> featurize(const ner::AnnotatedSentence& sentence, std::size_t position,
                                   const wordpiece::Tokenizer& tokenizer,
                                   const std::string& prev_label) {
  const std::string& token = sentence.tokens[position];
  std::vector<std::string> features;
  features.reserve(16);

  const std::vector<std::string> pieces = tokenizer.tokenize_word(token);
  if (!pieces.empty()) {
    features.push_back("FIRST=" + pieces.front());
    for (const std::string& piece : pieces) features.push_back("WP=" + piece);
  }
  features.push_back("W=" + token);
  features.push_back("LW=" + lowercase(token));
  features.push_back("SHAPE=" + shape(token));

  const auto neighbor = [&](int offset) -> std::string {
    const long idx = static_cast<long>(position) + offset;
    if (idx < 0) return kBosToken;
    if (idx >= static_cast<long>(sentence.tokens.size())) return kEosToken;
    return sentence.tokens[static_cast<std::size_t>(idx)];
  };
  features.push_back("W[-1]=" + neighbor(-1));
  features.push_back("W[-2]=" + neighbor(-2));
  features.push_back("W[+1]=" + neighbor(+1));
  features.push_back("W[+2]=" + neighbor(+2));
  features.push_back("PREV=" + prev_label);
  return features;
}

std::vector<HashedFeature> hash_features(const std::vector<std::string>& names, int hash_bits) {
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  std::vector<HashedFeature> hashed;
  hashed.reserve(names.size());
  for (const std::string& name : names) {
    const std::uint64_t h = fnv1a(name);
    hashed.push_back({static_cast<std::uint32_t>(h & mask), (h >> 63) ? -1.0 : 1.0});
  }
  return hashed;
}

double cross_entropy(std::span<const double> weights, std::size_t dim, std::size_t n_labels,
                     const std::vector<HashedFeature>& features, std::size_t gold_label,
                     std::vector<SparseGrad>* grad_out) {
  std::vector<double> scores(n_labels, 0.0);
  for (std::size_t l = 0; l < n_labels; ++l) {
    const double* row = weights.data() + l * dim;
    double s = 0.0;
    for (const HashedFeature& f : features) s += f.sign * row[f.index];
    scores[l] = s;
  }
  const double max_score = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) {
    s = std::exp(s - max_score);
    z += s;
  }
  const double p_gold = scores[gold_label] / z;
  if (grad_out) {
    grad_out->clear();
    for (std::size_t l = 0; l < n_labels; ++l) {
      const double coeff = scores[l] / z - (l == gold_label ? 1.0 : 0.0);
      for (const HashedFeature& f : features) {
        grad_out->push_back({l * dim + f.index, f.sign * coeff});
      }
    }
  }
  return -std::log(p_gold);
}

double learning_rate_at(double lr0, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return lr0;
  const double last = static_cast<double>(total_steps - 1);
  return lr0 * (1.0 - static_cast<double>(step) / last);
}

std::uint64_t vocab_fingerprint(const wordpiece::Vocab& vocab) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const std::string& token : vocab.tokens()) {
    for (const char c : token) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t TaggerModel::weights_fnv() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(weights.data());
  const std::size_t n = weights.size() * sizeof(double);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

constexpr char kModelMagic[4] = {'H', 'T', 'A', 'G'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  std::uint32_t len = 0;
  read_pod(in, len);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

void TaggerModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out.write(kModelMagic, 4);
  write_pod(out, kModelVersion);
  write_pod(out, static_cast<std::int32_t>(hash_bits));
  write_string(out, feature_spec);
  write_pod(out, vocab_fingerprint);
  write_pod(out, static_cast<std::uint32_t>(labels.size()));
  for (const std::string& label : labels) write_string(out, label);
  write_pod(out, static_cast<std::int32_t>(config.batch_size));
  write_pod(out, static_cast<std::int32_t>(config.epochs));
  write_pod(out, config.learning_rate);
  write_pod(out, config.seed);
  write_pod(out, static_cast<std::int32_t>(best_epoch));
  write_pod(out, static_cast<std::uint32_t>(dev_f1_history.size()));
  for (const double f1 : dev_f1_history) write_pod(out, f1);
  // Sparse weights: only nonzero cells.
  std::uint64_t nonzero = 0;
  for (const double w : weights) {
    if (w != 0.0) ++nonzero;
  }
  write_pod(out, nonzero);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) {
      write_pod(out, static_cast<std::uint64_t>(i));
      write_pod(out, weights[i]);
    }
  }
  if (!out) throw DataError("short write to model file " + path.string());
}

TaggerModel TaggerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw DataError(path.string() + " is not a tagger model file");
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kModelVersion) {
    throw DataError("unsupported model version " + std::to_string(version));
  }
  TaggerModel model;
  std::int32_t hash_bits = 0;
  read_pod(in, hash_bits);
  model.hash_bits = hash_bits;
  model.feature_spec = read_string(in);
  read_pod(in, model.vocab_fingerprint);
  std::uint32_t n_labels = 0;
  read_pod(in, n_labels);
  model.labels.reserve(n_labels);
  for (std::uint32_t i = 0; i < n_labels; ++i) model.labels.push_back(read_string(in));
  std::int32_t batch_size = 0, epochs = 0, best_epoch = 0;
  read_pod(in, batch_size);
  read_pod(in, epochs);
  model.config.batch_size = batch_size;
  model.config.epochs = epochs;
  read_pod(in, model.config.learning_rate);
  read_pod(in, model.config.seed);
  model.config.hash_bits = model.hash_bits;
  read_pod(in, best_epoch);
  model.best_epoch = best_epoch;
  std::uint32_t history_len = 0;
  read_pod(in, history_len);
  model.dev_f1_history.resize(history_len);
  for (auto& f1 : model.dev_f1_history) read_pod(in, f1);
  model.weights.assign(model.labels.size() * model.dim(), 0.0);
  std::uint64_t nonzero = 0;
  read_pod(in, nonzero);
  for (std::uint64_t i = 0; i < nonzero; ++i) {
    std::uint64_t index = 0;
    double value = 0.0;
    read_pod(in, index);
    read_pod(in, value);
    if (index >= model.weights.size()) throw DataError("weight index out of range in " + path.string());
    model.weights[index] = value;
  }
  if (!in) throw DataError("truncated model file " + path.string());
  return model;
}

namespace {

struct Example {
  std::size_t sentence = 0;
  std::size_t position = 0;
};

std::vector<std::string> collect_labels(const ner::Dataset& dataset) {
  std::set<std::string> labels;
  for (const ner::AnnotatedSentence& s : dataset) {
    labels.insert(s.labels.begin(), s.labels.end());
  }
  labels.insert("O");
  return {labels.begin(), labels.end()};
}

std::size_t label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    throw DataError("label '" + label + "' missing from model inventory");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

// Static (prev-label-free) features, hashed once per token.
std::vector<std::vector<HashedFeature>> static_features(const ner::Dataset& dataset,
                                                        const wordpiece::Tokenizer& tokenizer,
                                                        int hash_bits) {
  std::vector<std::vector<HashedFeature>> features;
  features.reserve(dataset.size() * 8);
  for (const ner::AnnotatedSentence& sentence : dataset) {
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      std::vector<std::string> names = featurize(sentence, i, tokenizer, "");
      names.pop_back();  // drop the placeholder PREV feature
      features.push_back(hash_features(names, hash_bits));
    }
  }
  return features;
}

HashedFeature prev_label_feature(const std::string& label, int hash_bits) {
  const std::vector<std::string> names = {"PREV=" + label};
  return hash_features(names, hash_bits)[0];
}

std::size_t argmax_label(std::span<const double> weights, std::size_t dim, std::size_t n_labels,
                         const std::vector<HashedFeature>& features) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < n_labels; ++l) {
    const double* row = weights.data() + l * dim;
    double s = 0.0;
    for (const HashedFeature& f : features) s += f.sign * row[f.index];
    if (s > best_score) {
      best_score = s;
      best = l;
    }
  }
  return best;
}

ner::Dataset decode(const std::vector<double>& weights, const std::vector<std::string>& labels,
                    int hash_bits, const ner::Dataset& input,
                    const wordpiece::Tokenizer& tokenizer) {
  const std::size_t dim = std::size_t{1} << hash_bits;
  ner::Dataset output;
  output.reserve(input.size());
  for (const ner::AnnotatedSentence& sentence : input) {
    ner::AnnotatedSentence decoded = sentence;
    std::string prev = kStartLabel;
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      std::vector<std::string> names = featurize(sentence, i, tokenizer, prev);
      const std::vector<HashedFeature> features = hash_features(names, hash_bits);
      const std::size_t l = argmax_label(weights, dim, labels.size(), features);
      decoded.labels[i] = labels[l];
      prev = labels[l];
    }
    output.push_back(std::move(decoded));
  }
  return output;
}

}  // namespace

TrainResult train(const TrainConfig& config, const ner::Dataset& train_set,
                  const ner::Dataset& dev_set, const wordpiece::Tokenizer& tokenizer,
                  const TaggerModel* init) {
  if (train_set.empty() || dev_set.empty()) {
    throw DataError("train and dev datasets must be non-empty");
  }
  if (config.batch_size <= 0 || config.epochs <= 0 || config.learning_rate < 0.0) {
    throw UsageError("batch_size and epochs must be positive, learning_rate non-negative");
  }

  TaggerModel model;
  model.hash_bits = config.hash_bits;
  model.config = config;
  model.vocab_fingerprint = vocab_fingerprint(*tokenizer.vocab);
  if (init) {
    if (init->hash_bits != config.hash_bits) {
      throw UsageError("init model hash_bits mismatch");
    }
    model.labels = init->labels;
    model.weights = init->weights;
    for (const std::string& label : collect_labels(train_set)) {
      if (!std::binary_search(model.labels.begin(), model.labels.end(), label)) {
        throw DataError("label '" + label + "' missing from init model inventory");
      }
    }
  } else {
    model.labels = collect_labels(train_set);
    model.weights.assign(model.labels.size() << config.hash_bits, 0.0);
  }

  TrainResult result;
  result.initial_weights_fnv = model.weights_fnv();

  const std::size_t dim = model.dim();
  const std::size_t n_labels = model.labels.size();

  std::vector<Example> examples;
  std::vector<std::size_t> gold;
  for (std::size_t s = 0; s < train_set.size(); ++s) {
    for (std::size_t i = 0; i < train_set[s].tokens.size(); ++i) {
      examples.push_back({s, i});
      gold.push_back(label_index(model.labels, train_set[s].labels[i]));
    }
  }
  if (examples.empty()) throw DataError("training set has no tokens");

  const std::vector<std::vector<HashedFeature>> static_feats =
      static_features(train_set, tokenizer, config.hash_bits);
  std::vector<std::size_t> sentence_offsets(train_set.size(), 0);
  for (std::size_t s = 1; s < train_set.size(); ++s) {
    sentence_offsets[s] = sentence_offsets[s - 1] + train_set[s - 1].tokens.size();
  }

  const std::size_t batches_per_epoch =
      (examples.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(config.epochs);

  std::vector<double> best_weights;
  double best_f1 = -1.0;
  int best_epoch = 0;

  std::vector<std::size_t> indices(examples.size());
  std::vector<SparseGrad> grad;
  std::vector<SparseGrad> batch_grad;
  std::size_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(indices);

    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, examples.size());
      const double lr = learning_rate_at(config.learning_rate, step, total_steps);
      double batch_loss = 0.0;
      batch_grad.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = examples[indices[k]];
        const std::string prev =
            ex.position == 0 ? kStartLabel : train_set[ex.sentence].labels[ex.position - 1];
        std::vector<HashedFeature> features =
            static_feats[sentence_offsets[ex.sentence] + ex.position];
        features.push_back(prev_label_feature(prev, config.hash_bits));
        batch_loss += cross_entropy(model.weights, dim, n_labels, features, gold[indices[k]], &grad);
        batch_grad.insert(batch_grad.end(), grad.begin(), grad.end());
      }
      const double scale = lr / static_cast<double>(end - begin);
      for (const SparseGrad& g : batch_grad) {
        model.weights[g.index] -= scale * g.value;
      }
      batch_loss /= static_cast<double>(end - begin);
      if (!std::isfinite(batch_loss)) {
        throw DataError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                        std::to_string(b));
      }
      if (epoch == 1) result.epoch1_batch_losses.push_back(batch_loss);
      ++step;
    }

    const ner::Dataset decoded =
        decode(model.weights, model.labels, config.hash_bits, dev_set, tokenizer);
    const double f1 = 100.0 * scorer::score(dev_set, decoded).strict.micro.f1();
    result.dev_f1_history.push_back(f1);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_epoch = epoch;
      best_weights = model.weights;
    }
  }

  model.weights = std::move(best_weights);
  model.best_epoch = best_epoch;
  model.dev_f1_history = result.dev_f1_history;
  result.best_epoch = best_epoch;
  result.model = std::move(model);
  return result;
}

ner::Dataset predict(const TaggerModel& model, const wordpiece::Tokenizer& tokenizer,
                     const ner::Dataset& input) {
  if (model.labels.empty() || model.weights.size() != model.labels.size() * model.dim()) {
    throw DataError("model label inventory and weights are inconsistent");
  }
  if (model.vocab_fingerprint != 0 &&
      model.vocab_fingerprint != vocab_fingerprint(*tokenizer.vocab)) {
    throw DataError("vocabulary does not match the one the model was trained with");
  }
  return decode(model.weights, model.labels, model.hash_bits, input, tokenizer);
}

}  // namespace histoner::tagger
