#pragma once

#include <stdexcept>
#include <string>

namespace histoner {

// Bad input data: unreadable files, malformed records, violated invariants
// in user-supplied content. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad invocation: impossible parameter combinations. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace histoner
