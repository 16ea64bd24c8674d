#pragma once

#include <filesystem>
#include <string>

namespace histoner::io {

std::string read_file(const std::filesystem::path& path);

// Temp-file-then-rename so a crash never leaves a half-written output and
// re-runs are idempotent.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace histoner::io
