#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace histoner {

// splitmix64 stream. Self-contained so identical seeds give identical
// output on every platform, which the std distributions do not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  // Uniform in [lo, hi] inclusive.
  std::uint64_t int_range(std::uint64_t lo, std::uint64_t hi) {
    return lo + below(hi - lo + 1);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a(std::string_view bytes);

// Derives an independent stream for (seed, key, index) so per-item work is
// schedule-independent.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index);

}  // namespace histoner
