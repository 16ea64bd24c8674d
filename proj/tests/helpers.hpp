#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "histoner/ner.hpp"

namespace test_helpers {

inline std::filesystem::path fixture_dir() {
  return std::filesystem::path(HISTONER_FIXTURE_DIR);
}

inline std::filesystem::path fixture(const std::string& name) { return fixture_dir() / name; }

// Unique scratch dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("histoner-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline histoner::ner::AnnotatedSentence make_sentence(
    std::vector<std::string> tokens, const std::vector<histoner::ner::EntitySpan>& spans,
    std::string language = "de", std::string doc_id = "doc") {
  histoner::ner::AnnotatedSentence s;
  s.labels = histoner::ner::iob_from_spans(tokens.size(), spans);
  s.tokens = std::move(tokens);
  s.language = std::move(language);
  s.doc_id = std::move(doc_id);
  return s;
}

// n generic tokens t0..t{n-1}.
inline std::vector<std::string> tokens(std::size_t n, const std::string& prefix = "t") {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace test_helpers
