#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "helpers.hpp"
#include "histoner/corpus.hpp"
#include "histoner/errors.hpp"
#include "histoner/rng.hpp"
#include "histoner/scorer.hpp"
#include "histoner/tagger.hpp"

using namespace histoner;
using test_helpers::TempDir;
using test_helpers::make_sentence;

namespace {

// Separable 20-sentence task: person names, city names and filler words use
// disjoint token sets.
struct Fixture {
  ner::Dataset train;
  ner::Dataset dev;
  wordpiece::Vocab vocab;
  Fixture() {
    std::string all_text;
    for (int i = 0; i < 20; ++i) {
      const std::string first = "Pfirst" + std::to_string(i % 5);
      const std::string last = "Plast" + std::to_string(i % 4);
      const std::string verb = "besucht" + std::to_string(i % 3);
      const std::string city = "Cstadt" + std::to_string(i % 5);
      const ner::AnnotatedSentence s = make_sentence(
          {first, last, verb, city}, {{0, 2, "pers"}, {3, 4, "loc"}}, "de",
          "s" + std::to_string(i));
      train.push_back(s);
      all_text += first + " " + last + " " + verb + " " + city + " ";
    }
    dev = train;
    corpus::Document doc;
    doc.id = "fixture";
    doc.language = "de";
    doc.text = all_text;
    wordpiece::TrainOptions options;
    options.vocab_size = 120;
    vocab = wordpiece::train_vocab({doc}, options);
  }
};

tagger::TrainConfig small_config() {
  tagger::TrainConfig config;
  config.batch_size = 8;
  config.epochs = 10;
  config.learning_rate = 3e-5;
  config.seed = 1;
  config.hash_bits = 18;
  return config;
}

}  // namespace

TEST_CASE("featurize flags the first wordpiece and is deterministic") {
  const wordpiece::Vocab vocab(
      {wordpiece::kPad, wordpiece::kUnk, wordpiece::kCls, wordpiece::kSep, wordpiece::kMask,
       "Aj", "##ax", "A", "##j"});
  const wordpiece::Tokenizer tokenizer(vocab);
  const ner::AnnotatedSentence s = make_sentence({"Ajax", "siegt"}, {});
  const std::vector<std::string> features = tagger::featurize(s, 0, tokenizer, "O");
  CHECK(std::find(features.begin(), features.end(), "FIRST=Aj") != features.end());
  CHECK(std::find(features.begin(), features.end(), "WP=##ax") != features.end());
  CHECK(std::find(features.begin(), features.end(), "W=Ajax") != features.end());
  CHECK(std::find(features.begin(), features.end(), "LW=ajax") != features.end());
  CHECK(std::find(features.begin(), features.end(), "SHAPE=Xxxx") != features.end());
  CHECK(std::find(features.begin(), features.end(), "PREV=O") != features.end());
  // Boundary sentinels at position 0.
  CHECK(std::find(features.begin(), features.end(), "W[-1]=<S>") != features.end());
  CHECK(std::find(features.begin(), features.end(), "W[-2]=<S>") != features.end());
  CHECK(std::find(features.begin(), features.end(), "W[+1]=siegt") != features.end());
  CHECK(std::find(features.begin(), features.end(), "W[+2]=</S>") != features.end());
  CHECK(tagger::featurize(s, 0, tokenizer, "O") == features);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(12345);
  const std::size_t dim = 64;
  const std::size_t n_labels = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> weights(dim * n_labels);
    for (auto& w : weights) w = (rng.next_double() - 0.5) * 2.0;
    std::vector<tagger::HashedFeature> features;
    const std::size_t n_features = 1 + rng.below(8);
    for (std::size_t f = 0; f < n_features; ++f) {
      features.push_back({static_cast<std::uint32_t>(rng.below(dim)),
                          rng.below(2) ? 1.0 : -1.0});
    }
    const std::size_t gold = rng.below(n_labels);

    std::vector<tagger::SparseGrad> sparse;
    tagger::cross_entropy(weights, dim, n_labels, features, gold, &sparse);
    std::vector<double> analytic(weights.size(), 0.0);
    for (const auto& g : sparse) analytic[g.index] += g.value;

    const double h = 1e-5;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (analytic[i] == 0.0 && rng.below(16) != 0) continue;  // spot-check zeros
      std::vector<double> wp = weights, wm = weights;
      wp[i] += h;
      wm[i] -= h;
      const double up = tagger::cross_entropy(wp, dim, n_labels, features, gold, nullptr);
      const double down = tagger::cross_entropy(wm, dim, n_labels, features, gold, nullptr);
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      CHECK(std::abs(analytic[i] - numeric) / scale < 1e-4);
    }
  }
}

TEST_CASE("learning rate decays linearly to exactly zero") {
  const double lr0 = 3e-5;
  for (const std::size_t steps : {2UL, 5UL, 17UL, 100UL}) {
    CHECK(tagger::learning_rate_at(lr0, 0, steps) == lr0);
    CHECK(tagger::learning_rate_at(lr0, steps - 1, steps) == 0.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) sum += tagger::learning_rate_at(lr0, t, steps);
    CHECK(sum == doctest::Approx(lr0 * static_cast<double>(steps) / 2.0).epsilon(1e-12));
  }
  CHECK(tagger::learning_rate_at(lr0, 0, 1) == lr0);
}

TEST_CASE("separable fixture reaches dev F1 100 within 10 epochs") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  const tagger::TrainResult result =
      tagger::train(small_config(), fx.train, fx.dev, tokenizer);
  REQUIRE(!result.dev_f1_history.empty());
  CHECK(result.dev_f1_history[static_cast<std::size_t>(result.best_epoch - 1)] ==
        doctest::Approx(100.0));
  CHECK(result.best_epoch <= 10);
  // Checkpoint selection: returned dev F1 equals the history maximum, at its
  // first attainment.
  const double best = *std::max_element(result.dev_f1_history.begin(),
                                        result.dev_f1_history.end());
  CHECK(result.dev_f1_history[static_cast<std::size_t>(result.best_epoch - 1)] == best);
  for (int e = 0; e < result.best_epoch - 1; ++e) {
    CHECK(result.dev_f1_history[static_cast<std::size_t>(e)] < best);
  }
}

TEST_CASE("batch loss decreases over the first epoch on the separable fixture") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  tagger::TrainConfig config = small_config();
  config.batch_size = 4;
  const tagger::TrainResult result = tagger::train(config, fx.train, fx.dev, tokenizer);
  REQUIRE(result.epoch1_batch_losses.size() >= 4);
  CHECK(result.epoch1_batch_losses.back() < result.epoch1_batch_losses.front());
}

TEST_CASE("training is bitwise deterministic given the seed") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  const tagger::TrainResult a = tagger::train(small_config(), fx.train, fx.dev, tokenizer);
  const tagger::TrainResult b = tagger::train(small_config(), fx.train, fx.dev, tokenizer);
  REQUIRE(a.model.weights.size() == b.model.weights.size());
  CHECK(std::memcmp(a.model.weights.data(), b.model.weights.data(),
                    a.model.weights.size() * sizeof(double)) == 0);
  CHECK(a.dev_f1_history == b.dev_f1_history);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.model.weights_fnv() == b.model.weights_fnv());

  tagger::TrainConfig other = small_config();
  other.seed = 2;
  const tagger::TrainResult c = tagger::train(other, fx.train, fx.dev, tokenizer);
  CHECK(c.model.weights_fnv() != a.model.weights_fnv());
}

TEST_CASE("prediction recovers the memorized labels and is pure") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  const tagger::TrainResult result =
      tagger::train(small_config(), fx.train, fx.dev, tokenizer);
  const ner::Dataset decoded = tagger::predict(result.model, tokenizer, fx.dev);
  REQUIRE(decoded.size() == fx.dev.size());
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    CHECK(decoded[i].labels == fx.dev[i].labels);
  }
  const ner::Dataset again = tagger::predict(result.model, tokenizer, fx.dev);
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    CHECK(again[i].labels == decoded[i].labels);
  }
  CHECK(tagger::predict(result.model, tokenizer, {}).empty());
}

TEST_CASE("model file round-trips bit-exactly") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  tagger::TrainConfig config = small_config();
  config.epochs = 3;
  const tagger::TrainResult result = tagger::train(config, fx.train, fx.dev, tokenizer);
  TempDir tmp("model");
  result.model.save(tmp.path / "m.bin");
  const tagger::TaggerModel loaded = tagger::TaggerModel::load(tmp.path / "m.bin");
  CHECK(loaded.labels == result.model.labels);
  CHECK(loaded.hash_bits == result.model.hash_bits);
  CHECK(loaded.feature_spec == result.model.feature_spec);
  CHECK(loaded.vocab_fingerprint == result.model.vocab_fingerprint);
  CHECK(loaded.best_epoch == result.model.best_epoch);
  CHECK(loaded.dev_f1_history == result.model.dev_f1_history);
  CHECK(loaded.config.batch_size == config.batch_size);
  CHECK(loaded.config.learning_rate == config.learning_rate);
  CHECK(loaded.config.seed == config.seed);
  REQUIRE(loaded.weights.size() == result.model.weights.size());
  CHECK(std::memcmp(loaded.weights.data(), result.model.weights.data(),
                    loaded.weights.size() * sizeof(double)) == 0);
  // Decoding through the reloaded model is identical.
  const ner::Dataset a = tagger::predict(result.model, tokenizer, fx.dev);
  const ner::Dataset b = tagger::predict(loaded, tokenizer, fx.dev);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].labels == b[i].labels);
}

TEST_CASE("warm start uses the init weights at step zero") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  tagger::TrainConfig config = small_config();
  config.epochs = 2;
  const tagger::TrainResult parent = tagger::train(config, fx.train, fx.dev, tokenizer);

  tagger::TrainConfig frozen = small_config();
  frozen.learning_rate = 0.0;
  frozen.epochs = 1;
  const tagger::TrainResult child =
      tagger::train(frozen, fx.train, fx.dev, tokenizer, &parent.model);
  CHECK(child.initial_weights_fnv == parent.model.weights_fnv());
  // lr 0 leaves the init weights untouched.
  CHECK(child.model.weights_fnv() == parent.model.weights_fnv());
  CHECK(std::memcmp(child.model.weights.data(), parent.model.weights.data(),
                    child.model.weights.size() * sizeof(double)) == 0);
}

TEST_CASE("training errors are reported") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  CHECK_THROWS_AS(tagger::train(small_config(), {}, fx.dev, tokenizer), DataError);
  CHECK_THROWS_AS(tagger::train(small_config(), fx.train, {}, tokenizer), DataError);
  tagger::TrainConfig bad = small_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(tagger::train(bad, fx.train, fx.dev, tokenizer), UsageError);

  // Init model lacking a training label is rejected.
  tagger::TaggerModel tiny;
  tiny.labels = {"O"};
  tiny.hash_bits = small_config().hash_bits;
  tiny.weights.assign(tiny.labels.size() << tiny.hash_bits, 0.0);
  CHECK_THROWS_AS(tagger::train(small_config(), fx.train, fx.dev, tokenizer, &tiny),
                  DataError);
}

TEST_CASE("prediction rejects a mismatched vocabulary") {
  const Fixture fx;
  const wordpiece::Tokenizer tokenizer(fx.vocab);
  tagger::TrainConfig config = small_config();
  config.epochs = 1;
  const tagger::TrainResult result = tagger::train(config, fx.train, fx.dev, tokenizer);
  const wordpiece::Vocab other({wordpiece::kPad, wordpiece::kUnk, wordpiece::kCls,
                                wordpiece::kSep, wordpiece::kMask, "x"});
  const wordpiece::Tokenizer other_tokenizer(other);
  CHECK_THROWS_AS(tagger::predict(result.model, other_tokenizer, fx.dev), DataError);
}
