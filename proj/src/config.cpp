#include "histoner/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "histoner/errors.hpp"
#include "histoner/io.hpp"
#include "json.hpp"

namespace histoner::config {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  const std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

json parse_toml_scalar(const std::string& raw, std::size_t line_no) {
  const std::string value = trim(raw);
  if (value.empty()) throw DataError("toml line " + std::to_string(line_no) + ": empty value");
  if (value.front() == '"') {
    if (value.size() < 2 || value.back() != '"') {
      throw DataError("toml line " + std::to_string(line_no) + ": unterminated string");
    }
    return value.substr(1, value.size() - 2);
  }
  if (value == "true") return true;
  if (value == "false") return false;
  if (value.find_first_of(".eE") != std::string::npos &&
      value.find_first_not_of("+-0123456789.eE") == std::string::npos) {
    return std::stod(value);
  }
  if (value.find_first_not_of("+-0123456789") == std::string::npos) {
    return std::stoll(value);
  }
  throw DataError("toml line " + std::to_string(line_no) + ": cannot parse value '" + value + "'");
}

json parse_toml_value(const std::string& raw, std::size_t line_no) {
  const std::string value = trim(raw);
  if (!value.empty() && value.front() == '[') {
    if (value.back() != ']') {
      throw DataError("toml line " + std::to_string(line_no) + ": unterminated array");
    }
    json array = json::array();
    std::string inner = value.substr(1, value.size() - 2);
    std::size_t start = 0;
    bool in_string = false;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
      if (i < inner.size() && inner[i] == '"') in_string = !in_string;
      if (i == inner.size() || (inner[i] == ',' && !in_string)) {
        const std::string item = trim(inner.substr(start, i - start));
        if (!item.empty()) array.push_back(parse_toml_scalar(item, line_no));
        start = i + 1;
      }
    }
    return array;
  }
  return parse_toml_scalar(value, line_no);
}

}  // namespace

std::string toml_to_json(const std::string& toml_text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in(toml_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw DataError("toml line " + std::to_string(line_no) + ": malformed section header");
      }
      const std::string section = trim(line.substr(1, line.size() - 2));
      table = &root;
      std::size_t start = 0;
      while (start <= section.size()) {
        const std::size_t dot = section.find('.', start);
        const std::string part =
            trim(section.substr(start, dot == std::string::npos ? dot : dot - start));
        if (part.empty()) {
          throw DataError("toml line " + std::to_string(line_no) + ": empty section name");
        }
        table = &(*table)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("toml line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') {
      key = key.substr(1, key.size() - 2);
    }
    if (key.empty()) throw DataError("toml line " + std::to_string(line_no) + ": empty key");
    (*table)[key] = parse_toml_value(line.substr(eq + 1), line_no);
  }
  return root.dump();
}

namespace {

harness::Grid grid_from_json(const json& j, const harness::Grid& fallback) {
  harness::Grid grid = fallback;
  if (j.contains("batch_sizes")) grid.batch_sizes = j["batch_sizes"].get<std::vector<int>>();
  if (j.contains("epochs")) grid.epoch_counts = j["epochs"].get<std::vector<int>>();
  if (j.contains("learning_rates")) {
    grid.learning_rates = j["learning_rates"].get<std::vector<double>>();
  }
  if (j.contains("seeds")) grid.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  return grid;
}

void apply_env_overrides(ExperimentConfig& config) {
  const auto env = [](const char* name) -> const char* { return std::getenv(name); };
  if (const char* v = env("HISTONER_SEED")) config.seed = std::stoull(v);
  if (const char* v = env("HISTONER_JOBS")) config.jobs = std::stoi(v);
  if (const char* v = env("HISTONER_BUCKETS")) config.buckets = std::stoi(v);
  if (const char* v = env("HISTONER_HASH_BITS")) config.hash_bits = std::stoi(v);
  if (const char* v = env("HISTONER_OUTPUT_DIR")) config.output_dir = v;
  if (const char* v = env("HISTONER_VOCAB")) config.vocab_path = v;
  if (const char* v = env("HISTONER_LABEL_COLUMN")) config.label_column = v;
  if (const char* v = env("HISTONER_NORMALIZE_LONG_S")) {
    config.normalize_long_s = std::string(v) == "1" || std::string(v) == "true";
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid config JSON: ") + e.what());
  }
  ExperimentConfig config;
  if (j.contains("datasets")) {
    for (const auto& [language, splits] : j["datasets"].items()) {
      for (const auto& [split, path] : splits.items()) {
        config.datasets[language][split] = path.get<std::string>();
      }
    }
  }
  if (j.contains("vocab")) config.vocab_path = j["vocab"].get<std::string>();
  if (j.contains("output_dir")) config.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("jobs")) config.jobs = j["jobs"].get<int>();
  if (j.contains("buckets")) config.buckets = j["buckets"].get<int>();
  if (j.contains("hash_bits")) config.hash_bits = j["hash_bits"].get<int>();
  if (j.contains("normalize_long_s")) config.normalize_long_s = j["normalize_long_s"].get<bool>();
  if (j.contains("label_column")) config.label_column = j["label_column"].get<std::string>();
  if (j.contains("grids")) {
    const json& grids = j["grids"];
    if (grids.contains("stage1")) {
      config.stage1_grid = grid_from_json(grids["stage1"], harness::Grid::stage1_default());
    }
    if (grids.contains("stage2")) {
      config.stage2_grid = grid_from_json(grids["stage2"], harness::Grid::stage2_default());
    }
  }
  apply_env_overrides(config);
  return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  if (path.extension() == ".toml") return from_json_text(toml_to_json(text));
  return from_json_text(text);
}

void ExperimentConfig::validate() const {
  for (const auto& [language, splits] : datasets) {
    for (const auto& [split, path] : splits) {
      if (!std::filesystem::exists(path)) {
        throw DataError("dataset path does not exist: " + path + " (" + language + "/" + split +
                        ")");
      }
    }
  }
  if (!vocab_path.empty() && !std::filesystem::exists(vocab_path)) {
    throw DataError("vocabulary path does not exist: " + vocab_path);
  }
}

}  // namespace histoner::config
