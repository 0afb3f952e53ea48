#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "graphata/checkpoint.hpp"
#include "graphata/errors.hpp"
#include "graphata/graph_io.hpp"
#include "graphata/harness.hpp"
#include "graphata/split.hpp"
#include "graphata/text.hpp"

namespace graphata {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::size_t find_domain(const std::vector<Domain>& domains, const std::string& name) {
  for (std::size_t i = 0; i < domains.size(); ++i)
    if (domains[i].name == name) return i;
  throw ConfigError("unknown domain '" + name + "'");
}

Domain node_domain(std::string name, Graph g) {
  Domain d;
  d.name = std::move(name);
  d.input = GraphInput::from_graph(g);
  d.labels = g.labels();
  d.graph = std::move(g);
  return d;
}

Domain graph_domain(std::string name, GraphCorpus c) {
  Domain d;
  d.name = std::move(name);
  d.input = GraphInput::from_corpus(c);
  d.labels = c.labels;
  d.corpus = std::move(c);
  return d;
}

int num_classes_of(const Domain& d) { return d.graph ? d.graph->num_classes() : d.corpus->num_classes; }

// Maps a failure to the CLI exit code class.
int error_code_of(const std::exception& e) {
  if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const CheckpointError*>(&e)) {
    return 4;
  }
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return 2;
  }
  return 1;
}

// Runs job(i) for i in [0, jobs) on up to `workers` threads.
void parallel_for(std::size_t jobs, unsigned workers, const std::function<void(std::size_t)>& job) {
  if (workers <= 1 || jobs <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) job(i);
    });
  for (std::thread& t : pool) t.join();
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

SeedResult failed_seed(std::uint64_t seed, const std::exception& e) {
  SeedResult r;
  r.seed = seed;
  r.ok = false;
  r.error = e.what();
  r.error_code = error_code_of(e);
  return r;
}

void save_domains(const std::vector<Domain>& domains, const fs::path& dir) {
  for (const Domain& d : domains) {
    if (d.graph) save_graph(*d.graph, (dir / (d.name + ".graph")).string());
    if (d.corpus) save_corpus(*d.corpus, (dir / (d.name + ".corpus")).string());
  }
}

// One seed of run_experiment, writing its artifacts under dir.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  try {
    const PreparedSeed prepared = prepare_seed(config, seed);
    std::string model_path;
    if (config.save_artifacts) {
      fs::create_directories(dir);
      save_domains(prepared.domains, dir);
      for (std::size_t i = 0; i < prepared.sources.size(); ++i)
        save_checkpoint(prepared.sources[i], (dir / ("source_" + config.sources[i] + ".ckpt")).string());
      model_path = (dir / "ata.ckpt").string();
    }
    SeedResult r = adapt_prepared(prepared, config.adaptation, model_path);
    if (config.save_artifacts) write_text_file(dir / "history.csv", history_csv(r.history));
    return r;
  } catch (const std::exception& e) {
    return failed_seed(seed, e);
  }
}

ordered_json timings_to_json(const PhaseTimings& t) {
  return {{"generate", t.generate}, {"train_sources", t.train_sources}, {"adapt", t.adapt},
          {"evaluate", t.evaluate}, {"total", t.total}};
}

PhaseTimings timings_from_json(const ordered_json& j) {
  PhaseTimings t;
  t.generate = j.at("generate").get<double>();
  t.train_sources = j.at("train_sources").get<double>();
  t.adapt = j.at("adapt").get<double>();
  t.evaluate = j.at("evaluate").get<double>();
  t.total = j.at("total").get<double>();
  return t;
}

ordered_json aggregate_to_json(const Aggregate& a) { return {{"mean", a.mean}, {"std", a.std}, {"count", a.count}}; }

Aggregate aggregate_from_json(const ordered_json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<std::size_t>()};
}

Aggregate target_aggregate(const std::vector<SeedResult>& seeds) {
  std::vector<double> v;
  for (const SeedResult& s : seeds)
    if (s.ok) v.push_back(s.target_accuracy);
  return aggregate(v);
}

Aggregate ensemble_aggregate(const std::vector<SeedResult>& seeds) {
  std::vector<double> v;
  for (const SeedResult& s : seeds)
    if (s.ok) v.push_back(s.ensemble_accuracy);
  return aggregate(v);
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out = open_for_write(path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GRAPHATA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
  return std::max(1u, n);
}

std::vector<Domain> build_domains(const ExperimentConfig& config, std::uint64_t seed) {
  std::vector<Domain> out;
  switch (config.data.kind) {
    case DataKind::csbm:
      for (std::size_t i = 0; i < config.data.domains.size(); ++i) {
        const DomainSpec& spec = config.data.domains[i];
        CsbmParams p = config.data.csbm;
        p.inter_q = *spec.inter_q;
        p.seed = data_seed(seed, i);
        Graph g = csbm_generate(p);
        g.set_name(spec.name);
        out.push_back(node_domain(spec.name, std::move(g)));
      }
      break;
    case DataKind::files:
      for (const DomainSpec& spec : config.data.domains) {
        if (config.task == TaskKind::node) {
          Graph g = load_graph(spec.path);
          if (!g.has_labels()) throw ConfigError("domain " + spec.name + ": " + spec.path + " has no labels");
          out.push_back(node_domain(spec.name, std::move(g)));
        } else {
          out.push_back(graph_domain(spec.name, load_corpus(spec.path)));
        }
      }
      break;
    case DataKind::density_corpus: {
      CorpusParams p = config.data.corpus;
      p.seed = data_seed(seed, 0);
      std::array<GraphCorpus, 4> parts = density_quartile_split(synthetic_corpus(p));
      const std::vector<std::string> names = config.domain_names();
      for (std::size_t i = 0; i < 4; ++i) {
        parts[i].name = names[i];
        out.push_back(graph_domain(names[i], std::move(parts[i])));
      }
      break;
    }
  }
  const std::size_t d = out.front().input.feature_dim();
  const int k = num_classes_of(out.front());
  for (const Domain& dom : out) {
    if (dom.input.feature_dim() != d) throw ConfigError("domain " + dom.name + " has a different feature dimension");
    if (num_classes_of(dom) != k) throw ConfigError("domain " + dom.name + " has a different number of classes");
  }
  return out;
}

std::vector<GnnModel> PreparedSeed::source_models() const {
  std::vector<GnnModel> out;
  for (const Checkpoint& c : sources) out.push_back(c.model);
  return out;
}

PreparedSeed prepare_seed(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const Stopwatch total;
  memory::reset_peak();
  const std::size_t baseline = memory::stats().current_bytes;

  PreparedSeed p;
  p.seed = seed;
  Stopwatch phase;
  p.domains = build_domains(config, seed);
  p.target_index = find_domain(p.domains, config.target);
  p.timings.generate = phase.seconds();

  phase = Stopwatch();
  std::vector<std::size_t> dims = config.model_dims();
  dims[0] = p.target().input.feature_dim();
  const int k = num_classes_of(p.target());
  for (std::size_t i = 0; i < config.sources.size(); ++i) {
    const Domain& d = p.domains[find_domain(p.domains, config.sources[i])];
    const Split split = train_val_test_split(d.labels, config.split_ratios, split_seed(seed, i));
    GnnModel init = GnnModel::initialized(config.backbone, config.task, dims, k, init_seed(seed));
    TrainResult trained = train_source(std::move(init), d.input, d.labels, split, config.source_training, d.name, seed);
    p.source_test_accuracy.push_back(trained.checkpoint.metadata.test_accuracy);
    p.sources.push_back(std::move(trained.checkpoint));
  }
  p.timings.train_sources = phase.seconds();

  phase = Stopwatch();
  const Domain& target = p.target();
  for (const Checkpoint& c : p.sources)
    p.source_target_accuracy.push_back(evaluate_accuracy(gnn_forward(c.model, target.input).logits, target.labels));
  const std::vector<GnnModel> models = p.source_models();
  p.ensemble_accuracy = evaluate_accuracy(ensemble_predict(models, target.input), target.labels);
  p.timings.evaluate = phase.seconds();
  p.timings.total = total.seconds();
  p.peak_bytes = memory::stats().peak_bytes - std::min(baseline, memory::stats().peak_bytes);
  return p;
}

SeedResult adapt_prepared(const PreparedSeed& prepared, const AdaptationConfig& adaptation,
                          const std::string& model_path) {
  const Stopwatch total;
  memory::reset_peak();
  const std::size_t baseline = memory::stats().current_bytes;

  SeedResult r;
  r.seed = prepared.seed;
  r.source_test_accuracy = prepared.source_test_accuracy;
  r.source_target_accuracy = prepared.source_target_accuracy;
  r.ensemble_accuracy = prepared.ensemble_accuracy;
  r.timings = prepared.timings;
  const Domain& target = prepared.target();
  r.num_nodes = target.input.num_nodes();
  r.num_edges = target.graph ? target.graph->num_edges() : target.input.adjacency.nonzeros() / 2;

  const std::vector<GnnModel> models = prepared.source_models();
  Stopwatch phase;
  AdaptResult adapted = adapt(models, target.input, adaptation, target.labels);
  r.timings.adapt = phase.seconds();

  phase = Stopwatch();
  const AtaOutput initial = ata_forward(AtaModel(models, adaptation.ata_options()), target.input);
  r.initial_accuracy = evaluate_accuracy(initial.probabilities, target.labels);
  const AtaOutput out = ata_forward(adapted.model, target.input);
  r.target_accuracy = evaluate_accuracy(out.probabilities, target.labels);
  r.support_mean = support_mean(out.attention);
  r.timings.evaluate += phase.seconds();
  r.history = std::move(adapted.history);
  if (!model_path.empty()) save_ata_model(adapted.model, model_path);

  r.timings.total += total.seconds();
  const std::size_t peak = memory::stats().peak_bytes - std::min(baseline, memory::stats().peak_bytes);
  r.peak_bytes = std::max(prepared.peak_bytes, peak);
  r.ok = true;
  return r;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(values.size()));
  return a;
}

int RunReport::exit_code() const {
  for (const SeedResult& s : seeds)
    if (!s.ok) return s.error_code;
  return 0;
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Stopwatch wall;
  const fs::path out_dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  RunReport report;
  report.config = config;
  report.seeds.resize(config.seeds.size());
  parallel_for(config.seeds.size(), worker_count(config.threads, config.seeds.size()), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    report.seeds[i] = run_seed(config, seed, out_dir / seed_dir_name(seed));
  });

  report.target = target_aggregate(report.seeds);
  report.ensemble = ensemble_aggregate(report.seeds);
  report.artifacts = {"report.json", "summary.csv", "metrics.csv", "timing.txt"};
  if (config.save_artifacts) {
    for (const SeedResult& s : report.seeds) {
      if (!s.ok) continue;
      const std::string dir = seed_dir_name(s.seed);
      for (const std::string& d : config.domain_names()) {
        report.artifacts.push_back(dir + "/" + d + (config.task == TaskKind::node ? ".graph" : ".corpus"));
      }
      for (const std::string& src : config.sources) report.artifacts.push_back(dir + "/source_" + src + ".ckpt");
      report.artifacts.push_back(dir + "/ata.ckpt");
      report.artifacts.push_back(dir + "/history.csv");
    }
  }
  report.wall_seconds = wall.seconds();

  write_text_file(out_dir / "summary.csv", summary_csv(report.seeds));
  write_text_file(out_dir / "metrics.csv", metrics_csv(report.seeds));
  write_text_file(out_dir / "timing.txt", timing_report(report));
  write_text_file(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  return report;
}

std::string summary_csv(const std::vector<SeedResult>& seeds) {
  std::size_t m = 0;
  for (const SeedResult& s : seeds) m = std::max(m, s.source_test_accuracy.size());
  std::ostringstream out;
  out << "seed,status,target_accuracy,ensemble_accuracy,initial_accuracy,support_mean";
  for (std::size_t i = 0; i < m; ++i) out << ",source" << i << "_test_accuracy";
  for (std::size_t i = 0; i < m; ++i) out << ",source" << i << "_target_accuracy";
  out << '\n';
  for (const SeedResult& s : seeds) {
    out << s.seed << ',' << (s.ok ? "ok" : "failed");
    if (s.ok) {
      out << ',' << format_double(s.target_accuracy) << ',' << format_double(s.ensemble_accuracy) << ','
          << format_double(s.initial_accuracy) << ',' << format_double(s.support_mean);
      for (std::size_t i = 0; i < m; ++i) out << ',' << format_double(s.source_test_accuracy[i]);
      for (std::size_t i = 0; i < m; ++i) out << ',' << format_double(s.source_target_accuracy[i]);
    } else {
      for (std::size_t i = 0; i < 4 + 2 * m; ++i) out << ',';
    }
    out << '\n';
  }
  const Aggregate t = target_aggregate(seeds), e = ensemble_aggregate(seeds);
  out << "mean,," << format_double(t.mean) << ',' << format_double(e.mean) << std::string(2 + 2 * m, ',') << '\n';
  out << "std,," << format_double(t.std) << ',' << format_double(e.std) << std::string(2 + 2 * m, ',') << '\n';
  return out.str();
}

std::string metrics_csv(const std::vector<SeedResult>& seeds) {
  std::ostringstream out;
  out << "seed,epoch,loss_cls,loss_reg,loss_total,accuracy,support_mean\n";
  for (const SeedResult& s : seeds)
    for (const EpochMetrics& m : s.history) {
      out << s.seed << ',' << m.epoch << ',' << format_double(m.loss_cls) << ',' << format_double(m.loss_reg) << ','
          << format_double(m.loss_total) << ',' << (m.accuracy ? format_double(*m.accuracy) : "") << ','
          << format_double(m.support_mean) << '\n';
    }
  return out.str();
}

ordered_json report_to_json(const RunReport& report) {
  ordered_json j;
  j["format"] = "graphata-report";
  j["config"] = config_to_json(report.config);
  j["target_accuracy"] = aggregate_to_json(report.target);
  j["ensemble_accuracy"] = aggregate_to_json(report.ensemble);
  ordered_json seeds = ordered_json::array();
  for (const SeedResult& s : report.seeds) {
    ordered_json sj;
    sj["seed"] = s.seed;
    sj["ok"] = s.ok;
    if (!s.ok) {
      sj["error"] = s.error;
      sj["error_code"] = s.error_code;
    } else {
      sj["target_accuracy"] = s.target_accuracy;
      sj["ensemble_accuracy"] = s.ensemble_accuracy;
      sj["initial_accuracy"] = s.initial_accuracy;
      sj["support_mean"] = s.support_mean;
      sj["source_test_accuracy"] = s.source_test_accuracy;
      sj["source_target_accuracy"] = s.source_target_accuracy;
      sj["epochs"] = s.history.size();
      sj["num_nodes"] = s.num_nodes;
      sj["num_edges"] = s.num_edges;
      sj["timings_seconds"] = timings_to_json(s.timings);
      sj["peak_bytes"] = s.peak_bytes;
    }
    seeds.push_back(sj);
  }
  j["seeds"] = seeds;
  j["wall_seconds"] = report.wall_seconds;
  j["artifacts"] = report.artifacts;
  return j;
}

RunReport report_from_json(const ordered_json& j) {
  try {
    if (j.value("format", "") != "graphata-report") throw ConfigError("not a graphata report");
    RunReport r;
    r.config = config_from_json(j.at("config"));
    r.target = aggregate_from_json(j.at("target_accuracy"));
    r.ensemble = aggregate_from_json(j.at("ensemble_accuracy"));
    for (const ordered_json& sj : j.at("seeds")) {
      SeedResult s;
      s.seed = sj.at("seed").get<std::uint64_t>();
      s.ok = sj.at("ok").get<bool>();
      if (!s.ok) {
        s.error = sj.at("error").get<std::string>();
        s.error_code = sj.at("error_code").get<int>();
      } else {
        s.target_accuracy = sj.at("target_accuracy").get<double>();
        s.ensemble_accuracy = sj.at("ensemble_accuracy").get<double>();
        s.initial_accuracy = sj.at("initial_accuracy").get<double>();
        s.support_mean = sj.at("support_mean").get<double>();
        s.source_test_accuracy = sj.at("source_test_accuracy").get<std::vector<double>>();
        s.source_target_accuracy = sj.at("source_target_accuracy").get<std::vector<double>>();
        s.num_nodes = sj.at("num_nodes").get<std::size_t>();
        s.num_edges = sj.at("num_edges").get<std::size_t>();
        s.timings = timings_from_json(sj.at("timings_seconds"));
        s.peak_bytes = sj.at("peak_bytes").get<std::size_t>();
        s.history.resize(sj.at("epochs").get<std::size_t>());
      }
      r.seeds.push_back(s);
    }
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

RunReport load_report(const std::string& directory) {
  return report_from_json(read_json_file((fs::path(directory) / "report.json").string()));
}

// ---- ablations and sweeps ----

std::vector<AblationVariant> ablation_variants(const AdaptationConfig& base) {
  std::vector<AblationVariant> out;
  for (AtaMode mode : {AtaMode::node_centric, AtaMode::layer_centric, AtaMode::model_centric})
    for (Normalizer n : {Normalizer::sparsemax, Normalizer::softmax}) {
      AdaptationConfig a = base;
      a.mode = mode;
      a.normalizer = n;
      a.pooling = ContextPooling::mean;
      a.use_reg = true;
      std::string name = to_string(mode);
      name = name.substr(0, name.find('_')) + "_" + to_string(n);
      out.push_back({name, a});
    }
  for (ContextPooling p : {ContextPooling::max, ContextPooling::min, ContextPooling::sum}) {
    AdaptationConfig a = base;
    a.mode = AtaMode::node_centric;
    a.normalizer = Normalizer::sparsemax;
    a.pooling = p;
    a.use_reg = true;
    out.push_back({"node_sparsemax_" + to_string(p), a});
  }
  AdaptationConfig a = base;
  a.mode = AtaMode::node_centric;
  a.normalizer = Normalizer::sparsemax;
  a.pooling = ContextPooling::mean;
  a.use_reg = false;
  out.push_back({"node_sparsemax_no_reg", a});
  return out;
}

AblationReport run_ablation(const ExperimentConfig& config, const std::vector<AblationVariant>& variants) {
  config.validate();
  for (const AblationVariant& v : variants) v.adaptation.validate();
  const std::size_t seeds = config.seeds.size();
  // results[seed][variant]
  std::vector<std::vector<SeedResult>> results(seeds, std::vector<SeedResult>(variants.size()));
  std::vector<double> ensemble(seeds, 0.0);
  std::vector<bool> prepared_ok(seeds, false);
  parallel_for(seeds, worker_count(config.threads, seeds), [&](std::size_t s) {
    const std::uint64_t seed = config.seeds[s];
    PreparedSeed prepared;
    try {
      prepared = prepare_seed(config, seed);
      prepared_ok[s] = true;
      ensemble[s] = prepared.ensemble_accuracy;
    } catch (const std::exception& e) {
      for (SeedResult& r : results[s]) r = failed_seed(seed, e);
      return;
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
      try {
        results[s][v] = adapt_prepared(prepared, variants[v].adaptation);
      } catch (const std::exception& e) {
        results[s][v] = failed_seed(seed, e);
      }
    }
  });

  AblationReport report;
  report.config = config;
  std::vector<double> ens;
  for (std::size_t s = 0; s < seeds; ++s)
    if (prepared_ok[s]) ens.push_back(ensemble[s]);
  report.ensemble = {aggregate(ens)};
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.variant = variants[v].name;
    row.adaptation = variants[v].adaptation;
    std::vector<double> support;
    for (std::size_t s = 0; s < seeds; ++s) {
      row.seeds.push_back(results[s][v]);
      if (results[s][v].ok) support.push_back(results[s][v].support_mean);
    }
    row.target = target_aggregate(row.seeds);
    row.support = aggregate(support);
    report.rows.push_back(std::move(row));
  }

  const fs::path out_dir(config.output_dir);
  write_text_file(out_dir / "ablation.csv", ablation_csv(report));
  for (const AblationRow& row : report.rows) {
    write_text_file(out_dir / "ablation" / row.variant / "summary.csv", summary_csv(row.seeds));
    write_text_file(out_dir / "ablation" / row.variant / "metrics.csv", metrics_csv(row.seeds));
  }
  return report;
}

std::string ablation_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "variant,mode,normalizer,context,use_reg,mean_accuracy,std_accuracy,support_mean,failed_seeds";
  for (std::uint64_t s : report.config.seeds) out << ",seed_" << s;
  out << '\n';
  for (const AblationRow& row : report.rows) {
    std::size_t failed = 0;
    for (const SeedResult& r : row.seeds) failed += !r.ok;
    out << row.variant << ',' << to_string(row.adaptation.mode) << ',' << to_string(row.adaptation.normalizer) << ','
        << to_string(row.adaptation.pooling) << ',' << (row.adaptation.use_reg ? "true" : "false") << ','
        << format_double(row.target.mean) << ',' << format_double(row.target.std) << ','
        << format_double(row.support.mean) << ',' << failed;
    for (const SeedResult& r : row.seeds) out << ',' << (r.ok ? format_double(r.target_accuracy) : "");
    out << '\n';
  }
  if (!report.ensemble.empty()) {
    out << "ensemble,,,,," << format_double(report.ensemble[0].mean) << ',' << format_double(report.ensemble[0].std)
        << ",,";
    for (std::size_t i = 0; i < report.config.seeds.size(); ++i) out << ',';
    out << '\n';
  }
  return out.str();
}

std::vector<SweepPoint> sweep_lambda(const ExperimentConfig& config, const std::vector<double>& lambdas) {
  config.validate();
  const std::size_t seeds = config.seeds.size();
  std::vector<std::vector<SeedResult>> results(seeds, std::vector<SeedResult>(lambdas.size()));
  parallel_for(seeds, worker_count(config.threads, seeds), [&](std::size_t s) {
    const std::uint64_t seed = config.seeds[s];
    PreparedSeed prepared;
    try {
      prepared = prepare_seed(config, seed);
    } catch (const std::exception& e) {
      for (SeedResult& r : results[s]) r = failed_seed(seed, e);
      return;
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      AdaptationConfig a = config.adaptation;
      a.lambda = lambdas[i];
      try {
        results[s][i] = adapt_prepared(prepared, a);
      } catch (const std::exception& e) {
        results[s][i] = failed_seed(seed, e);
      }
    }
  });
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    SweepPoint p;
    p.value = lambdas[i];
    for (std::size_t s = 0; s < seeds; ++s) p.seeds.push_back(results[s][i]);
    p.target = target_aggregate(p.seeds);
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<SweepPoint> sweep_layers(const ExperimentConfig& config, const std::vector<std::size_t>& depths) {
  std::vector<SweepPoint> points;
  for (std::size_t depth : depths) {
    ExperimentConfig c = config;
    c.layers = depth;
    c.validate();
    SweepPoint p;
    p.value = static_cast<double>(depth);
    p.seeds.resize(c.seeds.size());
    parallel_for(c.seeds.size(), worker_count(c.threads, c.seeds.size()), [&](std::size_t s) {
      try {
        p.seeds[s] = adapt_prepared(prepare_seed(c, c.seeds[s]), c.adaptation);
      } catch (const std::exception& e) {
        p.seeds[s] = failed_seed(c.seeds[s], e);
      }
    });
    p.target = target_aggregate(p.seeds);
    points.push_back(std::move(p));
  }
  return points;
}

std::string sweep_csv(const std::string& parameter, const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << parameter << ",mean_accuracy,std_accuracy,failed_seeds";
  if (!points.empty())
    for (const SeedResult& s : points.front().seeds) out << ",seed_" << s.seed;
  out << '\n';
  for (const SweepPoint& p : points) {
    std::size_t failed = 0;
    for (const SeedResult& s : p.seeds) failed += !s.ok;
    out << format_double(p.value) << ',' << format_double(p.target.mean) << ',' << format_double(p.target.std) << ','
        << failed;
    for (const SeedResult& s : p.seeds) out << ',' << (s.ok ? format_double(s.target_accuracy) : "");
    out << '\n';
  }
  return out.str();
}

}  // namespace graphata
