#include <algorithm>
#include <cstdio>
#include <sstream>

#include "graphata/errors.hpp"
#include "graphata/harness.hpp"
#include "graphata/text.hpp"

namespace graphata {

namespace fs = std::filesystem;

std::string homophily_histogram_csv(const std::vector<Domain>& domains, std::size_t bins) {
  if (bins == 0) throw UsageError("homophily histogram needs at least one bin");
  std::ostringstream out;
  out << "domain,bin,lower,upper,count,fraction\n";
  for (const Domain& d : domains) {
    std::vector<std::size_t> counts(bins, 0);
    std::size_t total = 0;
    if (d.graph) {
      for (const std::optional<double>& h : homophily_ratio(*d.graph)) {
        if (!h) continue;
        const auto b = std::min(bins - 1, static_cast<std::size_t>(*h * static_cast<double>(bins)));
        ++counts[b];
        ++total;
      }
    }
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = static_cast<double>(b) / static_cast<double>(bins);
      const double hi = static_cast<double>(b + 1) / static_cast<double>(bins);
      const double frac = total ? static_cast<double>(counts[b]) / static_cast<double>(total) : 0.0;
      out << d.name << ',' << b << ',' << format_double(lo) << ',' << format_double(hi) << ',' << counts[b] << ','
          << format_double(frac) << '\n';
    }
  }
  return out.str();
}

std::string attention_csv(const AtaOutput& output) {
  std::ostringstream out;
  std::size_t m = output.attention.empty() ? 0 : output.attention.front().cols();
  std::size_t n = 0;
  for (const Tensor& a : output.attention) n = std::max(n, a.rows());
  out << "node,stage";
  for (std::size_t i = 0; i < m; ++i) out << ",w" << i + 1;
  out << '\n';
  // Shared weights (one row per stage) are repeated for every node.
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t l = 0; l < output.attention.size(); ++l) {
      const Tensor& a = output.attention[l];
      const std::size_t row = a.rows() == 1 ? 0 : v;
      out << v << ',' << l;
      for (std::size_t i = 0; i < m; ++i) out << ',' << format_double(a(row, i));
      out << '\n';
    }
  return out.str();
}

namespace {

// Input of the first target graph for graph tasks, the whole target otherwise.
GraphInput sampled_input(const Domain& target) {
  if (!target.corpus) return target.input;
  GraphCorpus one;
  one.graphs = {target.corpus->graphs.front()};
  one.labels = {target.corpus->labels.front()};
  one.num_classes = target.corpus->num_classes;
  one.name = target.corpus->name;
  return GraphInput::from_corpus(one);
}

}  // namespace

std::vector<std::string> emit_plot_data(const std::string& report_dir, std::size_t bins) {
  const RunReport report = load_report(report_dir);
  const fs::path dir(report_dir);
  std::vector<std::string> written;

  const auto seed = std::find_if(report.seeds.begin(), report.seeds.end(), [](const SeedResult& s) { return s.ok; });
  if (seed == report.seeds.end()) return written;

  const std::vector<Domain> domains = build_domains(report.config, seed->seed);
  write_text_file(dir / "homophily.csv", homophily_histogram_csv(domains, bins));
  written.push_back("homophily.csv");

  const fs::path model_path = dir / ("seed_" + std::to_string(seed->seed)) / "ata.ckpt";
  AtaModel model;
  const Domain* target = nullptr;
  for (const Domain& d : domains)
    if (d.name == report.config.target) target = &d;
  if (fs::exists(model_path)) {
    model = load_ata_model(model_path.string());
  } else {
    const PreparedSeed prepared = prepare_seed(report.config, seed->seed);
    model = adapt(prepared.source_models(), prepared.target().input, report.config.adaptation).model;
  }
  write_text_file(dir / "attention.csv", attention_csv(ata_forward(model, sampled_input(*target))));
  written.push_back("attention.csv");

  for (const char* sweep : {"sweep_lambda.csv", "sweep_layers.csv"})
    if (fs::exists(dir / sweep)) written.push_back(sweep);
  return written;
}

std::string timing_report(const RunReport& report) {
  const ExperimentConfig& c = report.config;
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %8s %9s %3s %3s %5s %10s %10s %10s %10s %10s %10s %10s\n", "seed", "nodes",
                "edges", "m", "L", "d", "generate_s", "sources_s", "adapt_s", "epoch_ms", "eval_s", "total_s",
                "peak_MiB");
  out << line;
  for (const SeedResult& s : report.seeds) {
    if (!s.ok) continue;
    const double epoch_ms = s.history.empty() ? 0.0 : 1e3 * s.timings.adapt / static_cast<double>(s.history.size());
    std::snprintf(line, sizeof line, "%-8llu %8zu %9zu %3zu %3zu %5zu %10.3f %10.3f %10.3f %10.3f %10.3f %10.3f %10.2f\n",
                  static_cast<unsigned long long>(s.seed), s.num_nodes, s.num_edges, c.sources.size(), c.layers,
                  c.hidden, s.timings.generate, s.timings.train_sources, s.timings.adapt, epoch_ms, s.timings.evaluate,
                  s.timings.total, static_cast<double>(s.peak_bytes) / (1024.0 * 1024.0));
    out << line;
  }
  return out.str();
}

}  // namespace graphata
