#include "graphata/csbm.hpp"

#include <string>

#include "graphata/errors.hpp"
#include "graphata/rng.hpp"

namespace graphata {

namespace {

constexpr std::uint64_t kFeatureStream = 0x66656174;  // "feat"
constexpr std::uint64_t kEdgeStream = 0x65646765;     // "edge"
constexpr std::uint64_t kCorpusStream = 0x636f7270;   // "corp"

bool is_probability(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void CsbmParams::validate() const {
  if (num_classes < 1) throw ConfigError("csbm: num_classes must be >= 1");
  if (nodes_per_class < 1) throw ConfigError("csbm: nodes_per_class must be >= 1");
  if (feature_dim < 1) throw ConfigError("csbm: feature_dim must be >= 1");
  if (!is_probability(intra_p) || !is_probability(inter_q)) throw ConfigError("csbm: p and q must lie in [0, 1]");
  if (inter_q > intra_p) throw ConfigError("csbm: requires q <= p");
  if (class_means.size() != static_cast<std::size_t>(num_classes)) {
    throw ConfigError("csbm: expected " + std::to_string(num_classes) + " class means, got " +
                      std::to_string(class_means.size()));
  }
}

std::vector<double> default_class_means(int num_classes) {
  if (num_classes == 1) return {0.0};
  std::vector<double> means(num_classes);
  for (int k = 0; k < num_classes; ++k) means[k] = -2.0 + 4.0 * k / (num_classes - 1);
  return means;
}

Graph csbm_generate(const CsbmParams& params) {
  params.validate();
  const std::size_t k = static_cast<std::size_t>(params.num_classes);
  const std::size_t n = k * params.nodes_per_class;
  const std::size_t d = params.feature_dim;

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i / params.nodes_per_class);

  Rng feature_rng(derive_seed(params.seed, kFeatureStream));
  Tensor features({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = params.class_means[labels[i]];
    for (double& x : features.row(i)) x = mean + feature_rng.normal();
  }

  Rng edge_rng(derive_seed(params.seed, kEdgeStream));
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double prob = labels[u] == labels[v] ? params.intra_p : params.inter_q;
      if (edge_rng.uniform() < prob) edges.push_back({u, v});
    }
  }
  return Graph(n, std::move(edges), std::move(features), std::move(labels), params.num_classes);
}

double csbm_expected_edges(const CsbmParams& params) {
  const double n = static_cast<double>(params.nodes_per_class);
  const double k = params.num_classes;
  const double same = k * n * (n - 1.0) / 2.0;
  const double cross = k * (k - 1.0) / 2.0 * n * n;
  return same * params.intra_p + cross * params.inter_q;
}

double csbm_edge_variance(const CsbmParams& params) {
  const double n = static_cast<double>(params.nodes_per_class);
  const double k = params.num_classes;
  const double same = k * n * (n - 1.0) / 2.0;
  const double cross = k * (k - 1.0) / 2.0 * n * n;
  return same * params.intra_p * (1.0 - params.intra_p) + cross * params.inter_q * (1.0 - params.inter_q);
}

void CorpusParams::validate() const {
  if (num_classes < 1) throw ConfigError("corpus: num_classes must be >= 1");
  if (num_graphs < 1) throw ConfigError("corpus: num_graphs must be >= 1");
  if (min_nodes < 1 || max_nodes < min_nodes) throw ConfigError("corpus: need 1 <= min_nodes <= max_nodes");
  if (feature_dim < 1) throw ConfigError("corpus: feature_dim must be >= 1");
  if (!is_probability(min_edge_prob) || !is_probability(max_edge_prob) || max_edge_prob < min_edge_prob) {
    throw ConfigError("corpus: need 0 <= min_edge_prob <= max_edge_prob <= 1");
  }
}

GraphCorpus synthetic_corpus(const CorpusParams& params) {
  params.validate();
  const std::vector<double> means = default_class_means(params.num_classes);
  const double mid = 0.5 * (params.min_edge_prob + params.max_edge_prob);
  GraphCorpus corpus;
  corpus.num_classes = params.num_classes;
  corpus.name = "corpus";
  for (std::size_t g = 0; g < params.num_graphs; ++g) {
    Rng rng(derive_seed(params.seed, kCorpusStream, g));
    const int y = static_cast<int>(rng.below(static_cast<std::size_t>(params.num_classes)));
    const std::size_t n = params.min_nodes + rng.below(params.max_nodes - params.min_nodes + 1);
    const double p = rng.uniform(params.min_edge_prob, params.max_edge_prob);
    const double mean = params.signal * means[y] + params.density_shift * (p - mid);
    Tensor features({n, params.feature_dim});
    for (double& x : features.data()) x = mean + rng.normal();
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (rng.uniform() < p) edges.push_back({u, v});
    corpus.graphs.emplace_back(n, std::move(edges), std::move(features), std::nullopt, 0, "g" + std::to_string(g));
    corpus.labels.push_back(y);
  }
  return corpus;
}

}  // namespace graphata
