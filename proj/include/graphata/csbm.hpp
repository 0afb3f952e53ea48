#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "graphata/graph.hpp"

namespace graphata {

// Contextual stochastic block model. Node i belongs to class i / N.
struct CsbmParams {
  int num_classes = 4;
  std::size_t nodes_per_class = 500;
  double intra_p = 0.04;
  double inter_q = 0.012;
  std::size_t feature_dim = 16;
  // One scalar per class, broadcast across every feature dimension.
  std::vector<double> class_means{-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0};
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// K means evenly spaced on [-2, 2].
std::vector<double> default_class_means(int num_classes);

// Features ~ N(mean_k·1, I); each unordered pair is linked with probability
// p (same class) or q (different class). Features and edges use separate
// random streams derived from the seed.
Graph csbm_generate(const CsbmParams& params);

// Expected number of edges, Σ over unordered pairs of the link probability.
double csbm_expected_edges(const CsbmParams& params);
double csbm_edge_variance(const CsbmParams& params);

// Graph-classification corpus. Each graph is an Erdős–Rényi graph whose
// edge probability is drawn from [min_edge_prob, max_edge_prob]; node features
// are N(signal·mean_y + density_shift·(p_g − mid), I). Splitting such a corpus
// by density therefore yields domains with shifted feature distributions.
struct CorpusParams {
  int num_classes = 2;
  std::size_t num_graphs = 400;
  std::size_t min_nodes = 10;
  std::size_t max_nodes = 30;
  std::size_t feature_dim = 8;
  double min_edge_prob = 0.05;
  double max_edge_prob = 0.6;
  double signal = 0.5;
  double density_shift = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

GraphCorpus synthetic_corpus(const CorpusParams& params);

}  // namespace graphata
