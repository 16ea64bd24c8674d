#include "histoner/mlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "histoner/errors.hpp"
#include "histoner/rng.hpp"
#include "json.hpp"

namespace histoner::mlm {

namespace {

using wordpiece::kClsId;
using wordpiece::kMaskId;
using wordpiece::kSepId;

// Half-away-from-zero, so masked-count arithmetic on .5 boundaries is exact.
std::size_t round_half_away(double x) {
  return static_cast<std::size_t>(std::llround(x));
}

void truncate_seq_pair(std::vector<int>& a, std::vector<int>& b, std::size_t max_num_tokens,
                       Rng& rng) {
  while (a.size() + b.size() > max_num_tokens) {
    std::vector<int>& trunc = a.size() > b.size() ? a : b;
    if (rng.next_double() < 0.5) {
      trunc.erase(trunc.begin());
    } else {
      trunc.pop_back();
    }
  }
}

void apply_masking(MlmInstance& instance, const wordpiece::Vocab& vocab,
                   const BuildOptions& options, Rng& rng) {
  std::vector<std::vector<std::size_t>> candidates;
  for (std::size_t i = 0; i < instance.token_ids.size(); ++i) {
    const int id = instance.token_ids[i];
    if (id == kClsId || id == kSepId) continue;
    const std::string& token = vocab.token(id);
    if (options.whole_word_masking && !candidates.empty() &&
        token.rfind(wordpiece::kContinuation, 0) == 0) {
      candidates.back().push_back(i);
    } else {
      candidates.push_back({i});
    }
  }
  std::size_t maskable = 0;
  for (const auto& group : candidates) maskable += group.size();
  if (maskable == 0) return;

  rng.shuffle(candidates);
  const std::size_t num_to_predict =
      std::min(options.max_predictions,
               std::max<std::size_t>(1, round_half_away(options.mlm_prob *
                                                        static_cast<double>(maskable))));

  std::vector<std::pair<std::size_t, int>> masked;  // (position, original id)
  for (const auto& group : candidates) {
    if (masked.size() >= num_to_predict) break;
    if (masked.size() + group.size() > num_to_predict) {
      if (options.whole_word_masking) continue;  // skip groups that overshoot
    }
    for (const std::size_t pos : group) {
      if (masked.size() >= num_to_predict) break;
      const int original = instance.token_ids[pos];
      int replacement;
      if (rng.next_double() < 0.8) {
        replacement = kMaskId;
      } else if (rng.next_double() < 0.5) {
        replacement = original;
      } else {
        // Uniform over non-special ids.
        replacement = 5 + static_cast<int>(rng.below(vocab.size() - 5));
      }
      instance.token_ids[pos] = replacement;
      masked.emplace_back(pos, original);
    }
  }
  std::sort(masked.begin(), masked.end());
  for (const auto& [pos, original] : masked) {
    instance.masked_positions.push_back(pos);
    instance.masked_label_ids.push_back(original);
  }
}

void instances_from_document(const std::vector<TokenizedDocument>& docs, std::size_t doc_index,
                             const wordpiece::Vocab& vocab, const BuildOptions& options, Rng& rng,
                             std::vector<MlmInstance>& out) {
  const std::vector<std::vector<int>>& document = docs[doc_index].sentences;
  if (document.empty()) return;
  const std::size_t max_num_tokens = options.max_seq_len - 3;
  std::size_t target_seq_length = max_num_tokens;
  if (rng.next_double() < options.short_seq_prob) {
    target_seq_length = rng.int_range(2, max_num_tokens);
  }

  std::vector<std::vector<int>> current_chunk;
  std::size_t current_length = 0;
  std::size_t i = 0;
  while (i < document.size()) {
    current_chunk.push_back(document[i]);
    current_length += document[i].size();
    if (i == document.size() - 1 || current_length >= target_seq_length) {
      if (!current_chunk.empty()) {
        std::size_t a_end = 1;
        if (current_chunk.size() >= 2) {
          a_end = rng.int_range(1, current_chunk.size() - 1);
        }
        std::vector<int> tokens_a;
        for (std::size_t k = 0; k < a_end; ++k) {
          tokens_a.insert(tokens_a.end(), current_chunk[k].begin(), current_chunk[k].end());
        }
        std::vector<int> tokens_b;
        bool is_random_next = false;
        if (current_chunk.size() == 1 || rng.next_double() < 0.5) {
          is_random_next = true;
          const std::size_t target_b_length =
              target_seq_length > tokens_a.size() ? target_seq_length - tokens_a.size() : 0;
          std::size_t random_doc = doc_index;
          for (int attempt = 0; attempt < 10; ++attempt) {
            random_doc = rng.below(docs.size());
            if (random_doc != doc_index) break;
          }
          const std::vector<std::vector<int>>& other = docs[random_doc].sentences;
          if (!other.empty()) {
            const std::size_t random_start = rng.below(other.size());
            for (std::size_t j = random_start; j < other.size(); ++j) {
              tokens_b.insert(tokens_b.end(), other[j].begin(), other[j].end());
              if (tokens_b.size() >= target_b_length) break;
            }
          }
          // Unused tail segments get reprocessed into the next chunk.
          i -= current_chunk.size() - a_end;
        } else {
          for (std::size_t k = a_end; k < current_chunk.size(); ++k) {
            tokens_b.insert(tokens_b.end(), current_chunk[k].begin(), current_chunk[k].end());
          }
        }
        truncate_seq_pair(tokens_a, tokens_b, max_num_tokens, rng);
        if (!tokens_a.empty() && !tokens_b.empty()) {
          MlmInstance instance;
          instance.language = docs[doc_index].language;
          instance.is_random_next = is_random_next;
          instance.token_ids.push_back(kClsId);
          instance.token_ids.insert(instance.token_ids.end(), tokens_a.begin(), tokens_a.end());
          instance.token_ids.push_back(kSepId);
          instance.segment_ids.assign(instance.token_ids.size(), 0);
          instance.token_ids.insert(instance.token_ids.end(), tokens_b.begin(), tokens_b.end());
          instance.token_ids.push_back(kSepId);
          instance.segment_ids.resize(instance.token_ids.size(), 1);
          apply_masking(instance, vocab, options, rng);
          out.push_back(std::move(instance));
        }
      }
      current_chunk.clear();
      current_length = 0;
    }
    ++i;
  }
}

}  // namespace

std::vector<MlmInstance> build_instances(const std::vector<TokenizedDocument>& docs,
                                         const wordpiece::Vocab& vocab,
                                         const BuildOptions& options) {
  if (docs.empty()) throw DataError("no tokenized documents to build instances from");
  if (options.max_predictions == 0) throw UsageError("max_predictions must be positive");
  if (options.max_predictions > options.max_seq_len) {
    throw UsageError("max_predictions exceeds max_seq_len");
  }
  if (options.mlm_prob <= 0.0 || options.mlm_prob >= 1.0) {
    throw UsageError("mlm_prob must be in (0,1)");
  }
  if (options.max_seq_len < 4) throw UsageError("max_seq_len must fit CLS + 2 SEP + 1 token");

  std::vector<MlmInstance> instances;
  for (std::size_t dupe = 0; dupe < options.dupe_factor; ++dupe) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      Rng rng(derive_seed(options.seed, docs[d].id, dupe));
      instances_from_document(docs, d, vocab, options, rng, instances);
    }
  }
  return instances;
}

std::string instance_to_json(const MlmInstance& instance) {
  nlohmann::ordered_json j;
  j["token_ids"] = instance.token_ids;
  j["segment_ids"] = instance.segment_ids;
  j["is_random_next"] = instance.is_random_next;
  j["masked_positions"] = instance.masked_positions;
  j["masked_label_ids"] = instance.masked_label_ids;
  return j.dump();
}

MlmInstance instance_from_json(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  MlmInstance instance;
  instance.token_ids = j.at("token_ids").get<std::vector<int>>();
  instance.segment_ids = j.at("segment_ids").get<std::vector<int>>();
  instance.is_random_next = j.at("is_random_next").get<bool>();
  instance.masked_positions = j.at("masked_positions").get<std::vector<std::size_t>>();
  instance.masked_label_ids = j.at("masked_label_ids").get<std::vector<int>>();
  return instance;
}

std::vector<std::filesystem::path> shard_instances(const std::vector<MlmInstance>& instances,
                                                   std::uint64_t chunk_bytes,
                                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> shards;

  std::string language;
  std::map<std::string, std::size_t> next_index;  // per-language shard counter
  std::uint64_t current_bytes = 0;
  std::ofstream out;

  const auto open_next = [&](const std::string& lang) {
    char name[64];
    std::snprintf(name, sizeof(name), "pretrain-%s-%05zu.jsonl", lang.c_str(),
                  next_index[lang]++);
    const std::filesystem::path path = out_dir / name;
    out.close();
    out.open(path, std::ios::binary);
    if (!out) throw DataError("cannot write shard " + path.string());
    shards.push_back(path);
    current_bytes = 0;
  };

  for (const MlmInstance& instance : instances) {
    const std::string line = instance_to_json(instance) + "\n";
    if (line.size() > chunk_bytes) {
      throw DataError("chunk_bytes " + std::to_string(chunk_bytes) +
                      " smaller than a single serialized instance (" +
                      std::to_string(line.size()) + " bytes)");
    }
    const std::string lang = instance.language.empty() ? "und" : instance.language;
    if (!out.is_open() || lang != language) {
      language = lang;
      open_next(language);
    } else if (current_bytes + line.size() > chunk_bytes) {
      open_next(language);
    }
    out << line;
    current_bytes += line.size();
  }
  out.close();
  return shards;
}

double PretrainBudget::epochs_one_decimal() const {
  return std::round(epochs * 10.0) / 10.0;
}

PretrainBudget pretraining_budget(std::uint64_t steps, std::uint64_t batch_size,
                                  std::uint64_t seq_len, std::uint64_t corpus_subtokens) {
  if (steps == 0 || batch_size == 0 || seq_len == 0) {
    throw UsageError("steps, batch_size and seq_len must be positive");
  }
  if (corpus_subtokens == 0) throw DataError("corpus_subtokens must be positive");
  PretrainBudget budget;
  budget.steps = steps;
  budget.batch_size = batch_size;
  budget.seq_len = seq_len;
  budget.corpus_subtokens = corpus_subtokens;
  budget.subtokens_seen = steps * batch_size * seq_len;
  budget.epochs = static_cast<double>(budget.subtokens_seen) /
                  static_cast<double>(corpus_subtokens);
  return budget;
}

}  // namespace histoner::mlm
