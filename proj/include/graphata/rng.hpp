#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace graphata {

// Mixes a base seed with a stream tag and an index into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

// Thin wrapper over mt19937_64. The distribution transforms are written out
// here rather than taken from <random> so that generated data is identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::size_t below(std::size_t bound);
  // Standard normal (Marsaglia polar method).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace graphata
