#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace corrdict {

// Seeded generator with distributions implemented here rather than taken from
// <random>, whose distribution algorithms are implementation-defined. The raw
// engine (mt19937_64) is fully specified, so output is identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named purpose ("init", "noise", "kmeans", ...).
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace corrdict
