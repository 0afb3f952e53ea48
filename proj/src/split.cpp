#include "graphata/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "graphata/errors.hpp"
#include "graphata/rng.hpp"

namespace graphata {

namespace {

std::array<std::size_t, 3> part_sizes(std::size_t n, const std::array<double, 3>& ratios, bool ensure_each) {
  const double total = static_cast<double>(n);
  std::size_t train = static_cast<std::size_t>(std::floor(total * ratios[0] + 0.5));
  std::size_t val = static_cast<std::size_t>(std::floor(total * ratios[1] + 0.5));
  train = std::min(train, n);
  val = std::min(val, n - train);
  std::array<std::size_t, 3> sizes{train, val, n - train - val};
  if (ensure_each) {
    for (std::size_t part = 0; part < 3; ++part) {
      if (sizes[part] > 0 || ratios[part] == 0.0) continue;
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      ++sizes[part];
    }
  }
  return sizes;
}

void deal(std::vector<std::size_t>& items, const std::array<std::size_t, 3>& sizes, Split& out) {
  auto it = items.begin();
  out.train.insert(out.train.end(), it, it + sizes[0]);
  it += sizes[0];
  out.val.insert(out.val.end(), it, it + sizes[1]);
  it += sizes[1];
  out.test.insert(out.test.end(), it, items.end());
}

}  // namespace

Split train_val_test_split(std::span<const int> labels, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw UsageError("split: ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split: ratios must sum to 1");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  Split out;
  std::vector<std::size_t> pooled;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    if (members.size() < 3) {
      out.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                             " samples; split without stratification");
      pooled.insert(pooled.end(), members.begin(), members.end());
      continue;
    }
    deal(members, part_sizes(members.size(), ratios, true), out);
  }
  if (!pooled.empty()) {
    rng.shuffle(pooled);
    deal(pooled, part_sizes(pooled.size(), ratios, false), out);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split train_val_test_split(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  const std::vector<int> labels(n, 0);
  return train_val_test_split(labels, ratios, seed);
}

}  // namespace graphata
