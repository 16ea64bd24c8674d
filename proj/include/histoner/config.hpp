#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "histoner/harness.hpp"

namespace histoner::config {

// Minimal TOML reader covering what experiment configs need: top-level and
// [dotted.section] tables, string/integer/float/bool scalars, flat arrays,
// '#' comments. Parses into a JSON tree so TOML and JSON configs are
// interchangeable.
std::string toml_to_json(const std::string& toml_text);

struct ExperimentConfig {
  // language -> split ("train"/"dev") -> path
  std::map<std::string, std::map<std::string, std::string>> datasets;
  std::string vocab_path;
  std::string output_dir;
  std::uint64_t seed = 1;
  int jobs = 1;
  int buckets = 4;
  int hash_bits = 20;
  bool normalize_long_s = false;
  std::string label_column = "NE-COARSE-LIT";
  harness::Grid stage1_grid = harness::Grid::stage1_default();
  harness::Grid stage2_grid = harness::Grid::stage2_default();

  // Loads .toml or .json by extension, then applies HISTONER_* environment
  // overrides to scalar fields.
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig from_json_text(const std::string& json_text);

  // Referenced dataset/vocab paths must exist.
  void validate() const;
};

}  // namespace histoner::config
