#include "histoner/rng.hpp"

namespace histoner {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index) {
  std::uint64_t h = fnv1a(key);
  for (int i = 0; i < 8; ++i) {
    h ^= (index >> (i * 8)) & 0xFF;
    h *= 1099511628211ULL;
  }
  return seed ^ h;
}

}  // namespace histoner
