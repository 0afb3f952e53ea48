#include "graphata/graph_io.hpp"

#include <filesystem>

#include "graphata/errors.hpp"
#include "graphata/text.hpp"

namespace graphata {

namespace fs = std::filesystem;

void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out = open_for_write(path);
  const std::size_t d = g.feature_dim();
  out << g.num_nodes() << ' ' << d << ' ' << g.num_classes() << ' ' << (g.has_labels() ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto row = g.features().row(i);
    for (std::size_t j = 0; j < d; ++j) out << (j ? " " : "") << format_double(row[j]);
    out << '\n';
  }
  if (g.has_labels())
    for (int y : g.labels()) out << y << '\n';
  for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

Graph load_graph(const std::string& path) {
  LineReader in(path);
  const auto header = in.expect("header");
  in.expect_count(header, 4, "header 'n d K has_labels'");
  const std::size_t n = in.parse_size(header[0], "n");
  const std::size_t d = in.parse_size(header[1], "d");
  const long long k = in.parse_int(header[2], "K");
  const std::size_t has_labels = in.parse_size(header[3], "has_labels");
  if (has_labels > 1) in.fail("has_labels must be 0 or 1");
  if (k < 0) in.fail("K must be nonnegative");

  Tensor features({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = in.expect("feature line");
    in.expect_count(fields, d, "feature line");
    for (std::size_t j = 0; j < d; ++j) features(i, j) = in.parse_double(fields[j], "feature " + std::to_string(j));
  }

  std::optional<std::vector<int>> labels;
  if (has_labels) {
    labels.emplace(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto fields = in.expect("label line");
      in.expect_count(fields, 1, "label line");
      const long long y = in.parse_int(fields[0], "label");
      if (y < 0 || y >= k) in.fail("label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
      (*labels)[i] = static_cast<int>(y);
    }
  }

  std::vector<Edge> edges;
  while (auto fields = in.next()) {
    in.expect_count(*fields, 2, "edge line");
    const std::size_t u = in.parse_size((*fields)[0], "edge endpoint u");
    const std::size_t v = in.parse_size((*fields)[1], "edge endpoint v");
    if (u >= n || v >= n) in.fail("edge endpoint out of range for n = " + std::to_string(n));
    if (u == v) in.fail("self-loop on node " + std::to_string(u));
    edges.push_back({u, v});
  }
  return Graph(n, std::move(edges), std::move(features), std::move(labels), static_cast<int>(k),
               fs::path(path).stem().string());
}

void save_corpus(const GraphCorpus& corpus, const std::string& manifest_path) {
  corpus.validate();
  const fs::path manifest(manifest_path);
  const fs::path dir = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  std::ofstream out = open_for_write(manifest_path);
  out << corpus.size() << ' ' << corpus.num_classes << '\n';
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string file = stem + "_" + std::to_string(i) + ".graph";
    save_graph(corpus.graphs[i], (dir / file).string());
    out << file << ' ' << corpus.labels[i] << '\n';
  }
  if (!out) throw IoError("write failed for '" + manifest_path + "'");
}

GraphCorpus load_corpus(const std::string& manifest_path) {
  LineReader in(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  const auto header = in.expect("header");
  in.expect_count(header, 2, "header 'num_graphs K'");
  const std::size_t count = in.parse_size(header[0], "num_graphs");
  const long long k = in.parse_int(header[1], "K");
  if (k < 1) in.fail("K must be >= 1");

  GraphCorpus corpus;
  corpus.num_classes = static_cast<int>(k);
  corpus.name = fs::path(manifest_path).stem().string();
  for (std::size_t i = 0; i < count; ++i) {
    const auto fields = in.expect("graph entry");
    in.expect_count(fields, 2, "graph entry 'path label'");
    const long long y = in.parse_int(fields[1], "label");
    if (y < 0 || y >= k) in.fail("label outside [0, K)");
    const fs::path file{std::string(fields[0])};
    corpus.graphs.push_back(load_graph((file.is_absolute() ? file : dir / file).string()));
    corpus.labels.push_back(static_cast<int>(y));
  }
  if (in.next()) in.fail("more entries than num_graphs");
  corpus.validate();
  return corpus;
}

}  // namespace graphata
