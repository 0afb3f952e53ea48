#include "graphata/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphata/errors.hpp"

namespace graphata {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor features, std::optional<std::vector<int>> labels,
             int num_classes, std::string name)
    : num_nodes_(num_nodes),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      name_(std::move(name)) {
  if (features_.rank() != 2 || features_.rows() != num_nodes_) {
    throw ShapeError("graph: features " + shape_string(features_.shape()) + " for " + std::to_string(num_nodes_) +
                     " nodes");
  }
  for (Edge& e : edges) {
    if (e.u == e.v) throw UsageError("graph: self-loop on node " + std::to_string(e.u));
    if (e.u >= num_nodes_ || e.v >= num_nodes_) {
      throw UsageError("graph: edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ") out of range");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  if (labels_) {
    if (labels_->size() != num_nodes_) throw ShapeError("graph: label count does not match node count");
    if (num_classes_ <= 0) {
      num_classes_ = labels_->empty() ? 0 : *std::max_element(labels_->begin(), labels_->end()) + 1;
    }
    for (int y : *labels_) {
      if (y < 0 || y >= num_classes_) throw UsageError("graph: label " + std::to_string(y) + " outside [0, K)");
    }
  }

  std::vector<Triplet> triplets;
  triplets.reserve(2 * edges_.size());
  for (const Edge& e : edges_) {
    triplets.push_back({e.u, e.v, 1.0});
    triplets.push_back({e.v, e.u, 1.0});
  }
  adjacency_ = SparseMatrix::from_triplets(num_nodes_, num_nodes_, std::move(triplets));
}

const std::vector<int>& Graph::labels() const {
  if (!labels_) throw UsageError("graph '" + name_ + "' has no labels");
  return *labels_;
}

double Graph::density() const {
  if (num_nodes_ < 2) return 0.0;
  const double n = static_cast<double>(num_nodes_);
  return 2.0 * static_cast<double>(edges_.size()) / (n * (n - 1.0));
}

bool Graph::operator==(const Graph& other) const {
  return num_nodes_ == other.num_nodes_ && edges_ == other.edges_ && features_ == other.features_ &&
         labels_ == other.labels_ && num_classes_ == other.num_classes_ && name_ == other.name_;
}

void GraphCorpus::validate() const {
  if (graphs.empty()) throw UsageError("corpus '" + name + "' is empty");
  if (labels.size() != graphs.size()) throw ShapeError("corpus: one label per graph required");
  const std::size_t d = graphs.front().feature_dim();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].feature_dim() != d) throw ShapeError("corpus: inconsistent feature dimension at graph " + std::to_string(i));
    if (graphs[i].num_nodes() == 0) throw UsageError("corpus: graph " + std::to_string(i) + " has no nodes");
    if (labels[i] < 0 || labels[i] >= num_classes) throw UsageError("corpus: label outside [0, K)");
  }
}

namespace {

std::vector<double> degrees_with_self_loop(const Graph& g) {
  std::vector<double> deg(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) deg[v] = static_cast<double>(g.degree(v)) + 1.0;
  return deg;
}

// Builds A+I with entry (u, v) = weight(u, v), rows in column order.
template <typename Weight>
SparseMatrix self_looped(const Graph& g, Weight weight) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> pointers{0};
  std::vector<std::size_t> columns;
  std::vector<double> values;
  pointers.reserve(n + 1);
  columns.reserve(2 * g.num_edges() + n);
  values.reserve(2 * g.num_edges() + n);
  for (std::size_t u = 0; u < n; ++u) {
    bool self_done = false;
    for (std::size_t v : g.neighbors(u)) {
      if (!self_done && v > u) {
        columns.push_back(u);
        values.push_back(weight(u, u));
        self_done = true;
      }
      columns.push_back(v);
      values.push_back(weight(u, v));
    }
    if (!self_done) {
      columns.push_back(u);
      values.push_back(weight(u, u));
    }
    pointers.push_back(columns.size());
  }
  return SparseMatrix(n, n, std::move(pointers), std::move(columns), std::move(values));
}

}  // namespace

SparseMatrix normalized_adjacency(const Graph& g) {
  const std::vector<double> deg = degrees_with_self_loop(g);
  // deg[u]·deg[v] is commutative in floating point, so the result is exactly
  // symmetric.
  return self_looped(g, [&](std::size_t u, std::size_t v) { return 1.0 / std::sqrt(deg[u] * deg[v]); });
}

SparseMatrix random_walk_adjacency(const Graph& g) {
  const std::vector<double> deg = degrees_with_self_loop(g);
  return self_looped(g, [&](std::size_t u, std::size_t) { return 1.0 / deg[u]; });
}

namespace {

SparseMatrix neighbor_pool(const Graph& g, bool average) {
  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> pointers{0};
  std::vector<std::size_t> columns;
  std::vector<double> values;
  for (std::size_t v = 0; v < n; ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) {
      columns.push_back(v);
      values.push_back(1.0);
    } else {
      const double w = average ? 1.0 / static_cast<double>(nbrs.size()) : 1.0;
      for (std::size_t u : nbrs) {
        columns.push_back(u);
        values.push_back(w);
      }
    }
    pointers.push_back(columns.size());
  }
  return SparseMatrix(n, n, std::move(pointers), std::move(columns), std::move(values));
}

}  // namespace

SparseMatrix neighbor_mean_operator(const Graph& g) { return neighbor_pool(g, true); }

SparseMatrix neighbor_sum_operator(const Graph& g) { return neighbor_pool(g, false); }

std::vector<std::optional<double>> homophily_ratio(const Graph& g) {
  const std::vector<int>& y = g.labels();
  std::vector<std::optional<double>> out(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    std::size_t same = 0;
    for (std::size_t u : nbrs) same += y[u] == y[v];
    out[v] = static_cast<double>(same) / static_cast<double>(nbrs.size());
  }
  return out;
}

std::optional<double> mean_homophily(const std::vector<std::optional<double>>& ratios) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : ratios) {
    if (!r) continue;
    total += *r;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

std::array<GraphCorpus, 4> density_quartile_split(const GraphCorpus& corpus) {
  const std::size_t n = corpus.size();
  if (n < 4) throw UsageError("density_quartile_split: need at least 4 graphs, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> density(n);
  for (std::size_t i = 0; i < n; ++i) density[i] = corpus.graphs[i].density();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return density[a] < density[b]; });

  std::array<GraphCorpus, 4> groups;
  for (std::size_t q = 0; q < 4; ++q) {
    GraphCorpus& group = groups[q];
    group.num_classes = corpus.num_classes;
    group.name = corpus.name + "_q" + std::to_string(q + 1);
    for (std::size_t k = q * n / 4; k < (q + 1) * n / 4; ++k) {
      group.graphs.push_back(corpus.graphs[order[k]]);
      group.labels.push_back(corpus.labels[order[k]]);
    }
  }
  return groups;
}

}  // namespace graphata
