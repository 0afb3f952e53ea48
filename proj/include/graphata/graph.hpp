#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "graphata/sparse.hpp"
#include "graphata/tensor.hpp"

namespace graphata {

// Undirected edge with u < v.
struct Edge {
  std::size_t u;
  std::size_t v;
  auto operator<=>(const Edge&) const = default;
};

// Undirected, unweighted graph with node features and optional node labels.
// Edges are normalised to u < v, sorted and deduplicated on construction.
// Self-loops are rejected: the normalised operators add them where needed.
class Graph {
 public:
  Graph() = default;
  Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor features,
        std::optional<std::vector<int>> labels = std::nullopt, int num_classes = 0, std::string name = {});

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t feature_dim() const { return features_.cols(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Tensor& features() const { return features_; }
  bool has_labels() const { return labels_.has_value(); }
  // Throws UsageError when the graph is unlabeled.
  const std::vector<int>& labels() const;
  int num_classes() const { return num_classes_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  // Binary symmetric adjacency without self-loops.
  const SparseMatrix& adjacency() const { return adjacency_; }
  std::size_t degree(std::size_t v) const { return adjacency_.row_columns(v).size(); }
  std::span<const std::size_t> neighbors(std::size_t v) const { return adjacency_.row_columns(v); }

  // 2|E| / (n(n-1)); 0 for graphs with fewer than two nodes.
  double density() const;

  bool operator==(const Graph& other) const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  Tensor features_;
  std::optional<std::vector<int>> labels_;
  int num_classes_ = 0;
  std::string name_;
  SparseMatrix adjacency_;
};

// Graphs with one graph-level label each.
struct GraphCorpus {
  std::vector<Graph> graphs;
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  std::size_t size() const { return graphs.size(); }
  std::size_t feature_dim() const { return graphs.empty() ? 0 : graphs.front().feature_dim(); }
  // Nonempty, one label per graph in [0, K), consistent feature dimension.
  void validate() const;
};

// D^{-1/2}(A+I)D^{-1/2}.
SparseMatrix normalized_adjacency(const Graph& g);
// D^{-1}(A+I); row-stochastic counterpart of the symmetric operator.
SparseMatrix random_walk_adjacency(const Graph& g);
// Row v averages the neighbours of v (self excluded); isolated nodes select themselves.
SparseMatrix neighbor_mean_operator(const Graph& g);
// Row v sums the neighbours of v; isolated nodes select themselves.
SparseMatrix neighbor_sum_operator(const Graph& g);

// Per-node fraction of neighbours sharing the node's label; nullopt for
// isolated nodes. Requires labels.
std::vector<std::optional<double>> homophily_ratio(const Graph& g);
// Mean over the defined entries; nullopt if none are defined.
std::optional<double> mean_homophily(const std::vector<std::optional<double>>& ratios);

// Sorts by density ascending (stable, so ties keep original order) and cuts
// into four contiguous groups whose sizes differ by at most one.
std::array<GraphCorpus, 4> density_quartile_split(const GraphCorpus& corpus);

}  // namespace graphata
