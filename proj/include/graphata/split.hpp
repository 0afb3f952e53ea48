#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace graphata {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  // One entry per class that was too small to stratify.
  std::vector<std::string> warnings;
};

// Stratified random split. Each class is shuffled and cut at round(n_c·r).
// Classes with at least three members contribute to every part; smaller
// classes are pooled and split without stratification (with a warning).
// Index lists are returned sorted. Ratios must be nonnegative and sum to 1.
Split train_val_test_split(std::span<const int> labels, std::array<double, 3> ratios, std::uint64_t seed);
// Unlabeled variant: a single stratum of n items.
Split train_val_test_split(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace graphata
