#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histoner/wordpiece.hpp"

namespace histoner::mlm {

// Input unit for instance generation: one document as encoded sentences.
struct TokenizedDocument {
  std::string id;
  std::string language;
  std::vector<std::vector<int>> sentences;
};

// One packed, masked pretraining example.
struct MlmInstance {
  std::vector<int> token_ids;       // [CLS] A... [SEP] B... [SEP]
  std::vector<int> segment_ids;     // 0 over CLS+A+SEP, 1 over B+SEP
  bool is_random_next = false;
  std::vector<std::size_t> masked_positions;  // strictly increasing
  std::vector<int> masked_label_ids;          // original ids at those positions
  std::string language;                       // shard routing only, not serialized
};

std::string instance_to_json(const MlmInstance& instance);
MlmInstance instance_from_json(const std::string& line, std::size_t line_no);

struct BuildOptions {
  std::size_t max_seq_len = 512;
  std::size_t max_predictions = 75;  // 76 in 64k-vocabulary mode
  double mlm_prob = 0.15;
  std::size_t dupe_factor = 5;
  double short_seq_prob = 0.1;
  bool whole_word_masking = false;
  std::uint64_t seed = 12345;
};

// Two-segment packing with 50% random-next second segments and 80/10/10
// masked-token replacement. Each document is processed dupe_factor times
// with an RNG stream derived from (seed, doc id, duplication index), so the
// output is independent of processing schedule.
std::vector<MlmInstance> build_instances(const std::vector<TokenizedDocument>& docs,
                                         const wordpiece::Vocab& vocab,
                                         const BuildOptions& options);

// Greedy packing into `pretrain-{language}-{index:05}.jsonl` files, one
// series per language, no shard over chunk_bytes. Returns paths in order.
std::vector<std::filesystem::path> shard_instances(const std::vector<MlmInstance>& instances,
                                                   std::uint64_t chunk_bytes,
                                                   const std::filesystem::path& out_dir);

struct PretrainBudget {
  std::uint64_t steps = 0;
  std::uint64_t batch_size = 0;
  std::uint64_t seq_len = 0;
  std::uint64_t corpus_subtokens = 0;
  std::uint64_t subtokens_seen = 0;  // steps * batch_size * seq_len
  double epochs = 0.0;               // subtokens_seen / corpus_subtokens

  // Reporting precision for epochs.
  double epochs_one_decimal() const;
};

PretrainBudget pretraining_budget(std::uint64_t steps, std::uint64_t batch_size,
                                  std::uint64_t seq_len, std::uint64_t corpus_subtokens);

}  // namespace histoner::mlm
