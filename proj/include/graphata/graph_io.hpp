#pragma once

#include <string>

#include "graphata/graph.hpp"

namespace graphata {

// Text format:
//   n d K has_labels
//   n lines of d features
//   n lines with one label each (only when has_labels is 1)
//   one "u v" line per edge, sorted, u < v
// The graph name is not stored; load_graph names the graph after the file stem.
void save_graph(const Graph& g, const std::string& path);
Graph load_graph(const std::string& path);

// Manifest: first line "num_graphs K", then one "path label" line per graph.
// Paths are written relative to the manifest's directory. Graph files are
// written next to the manifest as <stem>_<index>.graph.
void save_corpus(const GraphCorpus& corpus, const std::string& manifest_path);
GraphCorpus load_corpus(const std::string& manifest_path);

}  // namespace graphata
