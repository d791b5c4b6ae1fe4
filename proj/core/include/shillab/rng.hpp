#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace shillab {

// 64-bit FNV-1a. Used for stable config hashes and seed-stream derivation.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 1469598103934665603ull) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// Derives an independent seed for the substream named by (tag, index).
// Every randomized stage pulls its seed through this so results do not
// depend on the order stages happen to run in.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0);

// Deterministic generator with fully pinned draw algorithms (splitmix64
// core, Box-Muller normals). Unlike <random> distributions, the exact
// bit stream is ours, so runs reproduce across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  double normal(double mean = 0.0, double stddev = 1.0);

  // Standard Gumbel noise -log(-log(u)), u ~ Uniform(0,1).
  double gumbel();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace shillab
