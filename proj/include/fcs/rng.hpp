#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fcs {

/// Stable 64-bit mix of a root seed with a label (FNV-1a + splitmix finalizer),
/// so every module draws from its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double gauss(double sigma = 1.0) {
    if (sigma == 0.0) return 0.0;
    return sigma * normal_(engine_);
  }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace fcs
