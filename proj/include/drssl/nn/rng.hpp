#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace drssl::nn {

// Seeded random stream. Independent sub-streams are derived by name, so the
// data, init and dropout streams never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng derive(std::string_view stream) const;
  Rng derive(std::uint64_t stream) const;

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    std::shuffle(values.begin(), values.end(), engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace drssl::nn
