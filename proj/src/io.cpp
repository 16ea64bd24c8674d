#include "histoner/io.hpp"

#include <fstream>
#include <sstream>

#ifdef _WIN32
#include <process.h>
#else
#include <unistd.h>
#endif

#include "histoner/errors.hpp"

namespace histoner::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
#ifdef _WIN32
  const int pid = _getpid();
#else
  const int pid = getpid();
#endif
  const std::filesystem::path tmp =
      path.parent_path() / (path.filename().string() + ".tmp-" + std::to_string(pid));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace histoner::io
