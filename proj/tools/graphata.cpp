// Command-line front end for the experiment harness.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "graphata/checkpoint.hpp"
#include "graphata/errors.hpp"
#include "graphata/graph_io.hpp"
#include "graphata/harness.hpp"
#include "graphata/text.hpp"

namespace fs = std::filesystem;
using namespace graphata;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitIo = 4;

// Flags shared by every subcommand that reads an experiment config.
struct ConfigFlags {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::string normalizer;
  std::string context;
  std::string context_scaling;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<std::size_t> r;
  std::optional<int> epochs;
  std::optional<unsigned> threads;
  bool unfreeze_sources = false;
  bool no_reg = false;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "Experiment config (JSON, comments allowed)");
    app.add_option("--profile", profile, "Built-in defaults to start from")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--seed", seed, "Run this single seed instead of the configured list");
    app.add_option("--out", out, "Output directory");
    app.add_option("--mode", mode, "Aggregation mode: node, layer or model");
    app.add_option("--normalizer", normalizer, "Attention normalizer: sparsemax or softmax");
    app.add_option("--context", context, "Local context pooling: mean, max, min or sum");
    app.add_option("--context-scaling", context_scaling, "Context in the aggregated matrix: none or diag");
    app.add_option("--lambda", lambda, "Weight of the global matrix");
    app.add_option("--gamma", gamma, "Memory bank momentum");
    app.add_option("--r", r, "Neighbours per pseudo-label");
    app.add_option("--epochs", epochs, "Adaptation epochs");
    app.add_option("--threads", threads, "Worker threads (0 = one per core)");
    app.add_flag("--unfreeze-sources", unfreeze_sources, "Also update the source matrices");
    app.add_flag("--no-reg", no_reg, "Drop the diversity regulariser");
  }

  ExperimentConfig resolve() const {
    const std::optional<std::string> p = profile.empty() ? std::nullopt : std::optional<std::string>(profile);
    ExperimentConfig c = config.empty() ? profile_config(p.value_or("desk")) : load_config(config, p);
    if (seed) c.seeds = {*seed};
    if (!out.empty()) c.output_dir = out;
    AdaptationConfig& a = c.adaptation;
    if (!mode.empty()) a.mode = parse_mode(mode);
    if (!normalizer.empty()) a.normalizer = parse_normalizer(normalizer);
    if (!context.empty()) a.pooling = parse_pooling(context);
    if (!context_scaling.empty()) a.scaling = parse_scaling(context_scaling);
    if (lambda) a.lambda = *lambda;
    if (gamma) a.gamma = *gamma;
    if (r) a.r = *r;
    if (epochs) a.epochs = *epochs;
    if (threads) c.threads = *threads;
    if (unfreeze_sources) a.unfreeze_sources = true;
    if (no_reg) a.use_reg = false;
    c.validate();
    return c;
  }
};

GraphInput load_input(TaskKind task, const std::string& path, std::vector<int>& labels) {
  if (task == TaskKind::node) {
    const Graph g = load_graph(path);
    if (g.has_labels()) labels = g.labels();
    return GraphInput::from_graph(g);
  }
  const GraphCorpus c = load_corpus(path);
  labels = c.labels;
  return GraphInput::from_corpus(c);
}

void print_seed_line(const SeedResult& s) {
  if (!s.ok) {
    std::printf("seed %llu  FAILED: %s\n", static_cast<unsigned long long>(s.seed), s.error.c_str());
    return;
  }
  std::printf("seed %llu  target %.4f  ensemble %.4f  support %.3f\n", static_cast<unsigned long long>(s.seed),
              s.target_accuracy, s.ensemble_accuracy, s.support_mean);
}

int cmd_generate(const ConfigFlags& flags) {
  const ExperimentConfig c = flags.resolve();
  const std::uint64_t seed = c.seeds.front();
  const fs::path dir = flags.out.empty() ? fs::path(c.output_dir) / "data" : fs::path(flags.out);
  fs::create_directories(dir);
  for (const Domain& d : build_domains(c, seed)) {
    if (d.graph) {
      const fs::path path = dir / (d.name + ".graph");
      save_graph(*d.graph, path.string());
      const std::optional<double> h = mean_homophily(homophily_ratio(*d.graph));
      std::printf("%s  nodes %zu  edges %zu  homophily %.4f  -> %s\n", d.name.c_str(), d.graph->num_nodes(),
                  d.graph->num_edges(), h.value_or(0.0), path.string().c_str());
    } else {
      const fs::path path = dir / (d.name + ".corpus");
      save_corpus(*d.corpus, path.string());
      std::printf("%s  graphs %zu  -> %s\n", d.name.c_str(), d.corpus->graphs.size(), path.string().c_str());
    }
  }
  return 0;
}

int cmd_train_source(const ConfigFlags& flags, const std::string& data, std::vector<std::string> domains) {
  const ExperimentConfig c = flags.resolve();
  const std::uint64_t seed = c.seeds.front();
  const fs::path dir = flags.out.empty() ? fs::path(c.output_dir) / "sources" : fs::path(flags.out);

  auto train_one = [&](const std::string& name, const GraphInput& input, const std::vector<int>& labels,
                       int num_classes, std::size_t index) {
    std::vector<std::size_t> dims = c.model_dims();
    dims[0] = input.feature_dim();
    const Split split = train_val_test_split(labels, c.split_ratios, split_seed(seed, index));
    GnnModel init = GnnModel::initialized(c.backbone, c.task, dims, num_classes, init_seed(seed));
    const TrainResult t = train_source(std::move(init), input, labels, split, c.source_training, name, seed);
    const fs::path path = dir / ("source_" + name + ".ckpt");
    fs::create_directories(dir);
    save_checkpoint(t.checkpoint, path.string());
    std::printf("%s  val %.4f  test %.4f  best epoch %d  -> %s\n", name.c_str(), t.checkpoint.metadata.val_accuracy,
                t.checkpoint.metadata.test_accuracy, t.checkpoint.metadata.best_epoch, path.string().c_str());
  };

  if (!data.empty()) {
    std::vector<int> labels;
    const GraphInput input = load_input(c.task, data, labels);
    if (labels.empty()) throw ConfigError(data + " has no labels to train on");
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    train_one(fs::path(data).stem().string(), input, labels, k, 0);
    return 0;
  }
  if (domains.empty()) domains = c.sources;
  const std::vector<Domain> all = build_domains(c, seed);
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const Domain& d) { return d.name == domains[i]; });
    if (it == all.end()) throw ConfigError("unknown domain '" + domains[i] + "'");
    const int k = it->graph ? it->graph->num_classes() : it->corpus->num_classes;
    // Split streams follow the position in the configured source list so
    // checkpoints match the ones an experiment run trains.
    const auto pos = std::find(c.sources.begin(), c.sources.end(), domains[i]);
    const std::size_t index = pos == c.sources.end() ? i : static_cast<std::size_t>(pos - c.sources.begin());
    train_one(it->name, it->input, it->labels, k, index);
  }
  return 0;
}

int cmd_adapt(const ConfigFlags& flags, const std::vector<std::string>& source_paths, const std::string& target) {
  const ExperimentConfig c = flags.resolve();
  const fs::path dir = flags.out.empty() ? fs::path(c.output_dir) / "adapt" : fs::path(flags.out);
  if (source_paths.empty() != target.empty())
    throw ConfigError("--source-ckpt and --target must be given together");

  if (!target.empty()) {
    std::vector<GnnModel> sources;
    for (const std::string& p : source_paths) sources.push_back(load_checkpoint(p).model);
    std::vector<int> labels;
    const GraphInput input = load_input(sources.front().task(), target, labels);
    AdaptationConfig a = c.adaptation;
    a.seed = c.seeds.front();
    const AdaptResult result = adapt(sources, input, a, labels);
    fs::create_directories(dir);
    save_ata_model(result.model, (dir / "ata.ckpt").string());
    write_text_file(dir / "history.csv", history_csv(result.history));
    if (!labels.empty()) {
      const AtaOutput out = ata_forward(result.model, input);
      std::printf("target %.4f  ensemble %.4f  support %.3f\n", evaluate_accuracy(out.probabilities, labels),
                  evaluate_accuracy(ensemble_predict(sources, input), labels), support_mean(out.attention));
    }
    std::printf("model -> %s\n", (dir / "ata.ckpt").string().c_str());
    return 0;
  }

  const PreparedSeed prepared = prepare_seed(c, c.seeds.front());
  fs::create_directories(dir);
  const SeedResult r = adapt_prepared(prepared, c.adaptation, (dir / "ata.ckpt").string());
  write_text_file(dir / "history.csv", history_csv(r.history));
  print_seed_line(r);
  std::printf("model -> %s\n", (dir / "ata.ckpt").string().c_str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data) {
  const std::string kind = read_checkpoint_file(model_path).header.value("kind", "");
  std::vector<int> labels;
  if (kind == "ata") {
    const AtaModel model = load_ata_model(model_path);
    const GraphInput input = load_input(model.reference().task(), data, labels);
    if (labels.empty()) throw ConfigError(data + " has no labels to evaluate against");
    const AtaOutput out = ata_forward(model, input);
    std::printf("accuracy %.4f  support %.3f\n", evaluate_accuracy(out.probabilities, labels),
                support_mean(out.attention));
    return 0;
  }
  const Checkpoint ckpt = load_checkpoint(model_path);
  const GraphInput input = load_input(ckpt.model.task(), data, labels);
  if (labels.empty()) throw ConfigError(data + " has no labels to evaluate against");
  std::printf("accuracy %.4f\n", evaluate_accuracy(gnn_forward(ckpt.model, input).logits, labels));
  return 0;
}

int cmd_experiment(const ConfigFlags& flags) {
  const RunReport report = run_experiment(flags.resolve());
  for (const SeedResult& s : report.seeds) print_seed_line(s);
  std::printf("target %.4f ± %.4f  ensemble %.4f ± %.4f  (%zu seeds, %.1f s)\n", report.target.mean,
              report.target.std, report.ensemble.mean, report.ensemble.std, report.target.count,
              report.wall_seconds);
  std::printf("report -> %s\n", (fs::path(report.config.output_dir) / "report.json").string().c_str());
  return report.exit_code();
}

int cmd_ablate(const ConfigFlags& flags) {
  const ExperimentConfig c = flags.resolve();
  const AblationReport report = run_ablation(c, ablation_variants(c.adaptation));
  int code = 0;
  for (const AblationRow& row : report.rows) {
    std::printf("%-24s %.4f ± %.4f  support %.3f\n", row.variant.c_str(), row.target.mean, row.target.std,
                row.support.mean);
    for (const SeedResult& s : row.seeds)
      if (!s.ok && !code) code = s.error_code;
  }
  std::printf("table -> %s\n", (fs::path(c.output_dir) / "ablation.csv").string().c_str());
  return code;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& parameter, const std::vector<double>& values) {
  const ExperimentConfig c = flags.resolve();
  std::vector<SweepPoint> points;
  if (parameter == "lambda") {
    std::vector<double> lambdas = values;
    if (lambdas.empty())
      for (int i = 0; i <= 10; ++i) lambdas.push_back(i / 10.0);
    points = sweep_lambda(c, lambdas);
  } else {
    std::vector<std::size_t> depths;
    for (double v : values) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw ConfigError("layer counts must be positive integers");
      depths.push_back(static_cast<std::size_t>(v));
    }
    if (depths.empty()) depths = {1, 2, 3};
    points = sweep_layers(c, depths);
  }
  const fs::path path = fs::path(c.output_dir) / ("sweep_" + parameter + ".csv");
  write_text_file(path, sweep_csv(parameter, points));
  int code = 0;
  for (const SweepPoint& p : points) {
    std::printf("%s %-6g %.4f ± %.4f\n", parameter.c_str(), p.value, p.target.mean, p.target.std);
    for (const SeedResult& s : p.seeds)
      if (!s.ok && !code) code = s.error_code;
  }
  std::printf("table -> %s\n", path.string().c_str());
  return code;
}

int cmd_plot_data(const std::string& report_dir, std::size_t bins) {
  for (const std::string& f : emit_plot_data(report_dir, bins))
    std::printf("%s\n", (fs::path(report_dir) / f).string().c_str());
  return 0;
}

int cmd_timing(const std::string& report_dir) {
  std::fputs(timing_report(load_report(report_dir)).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source graph domain adaptation with attention-based aggregation"};
  app.require_subcommand(1);

  ConfigFlags generate_flags, train_flags, adapt_flags, experiment_flags, ablate_flags, sweep_flags;

  CLI::App* generate = app.add_subcommand("generate", "Generate the configured domains and write them to disk");
  generate_flags.add_to(*generate);

  CLI::App* train = app.add_subcommand("train-source", "Train source models");
  train_flags.add_to(*train);
  std::string train_data;
  std::vector<std::string> train_domains;
  train->add_option("--data", train_data, "Labelled graph file (or corpus manifest) to train on");
  train->add_option("--domain", train_domains, "Configured domains to train (default: the sources)");

  CLI::App* adapt_cmd = app.add_subcommand("adapt", "Adapt frozen sources to an unlabelled target");
  adapt_flags.add_to(*adapt_cmd);
  std::vector<std::string> source_ckpts;
  std::string target_path;
  adapt_cmd->add_option("--source-ckpt", source_ckpts, "Source checkpoint (repeat per source)");
  adapt_cmd->add_option("--target", target_path, "Target graph file (or corpus manifest)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Accuracy of a source or adapted checkpoint");
  std::string eval_model, eval_data;
  evaluate->add_option("--model", eval_model, "Checkpoint")->required();
  evaluate->add_option("--data", eval_data, "Labelled graph file (or corpus manifest)")->required();

  CLI::App* experiment = app.add_subcommand("experiment", "Full pipeline over every seed");
  experiment_flags.add_to(*experiment);

  CLI::App* ablate = app.add_subcommand("ablate", "Mode, normalizer, context and regulariser ablations");
  ablate_flags.add_to(*ablate);

  CLI::App* sweep = app.add_subcommand("sweep", "Accuracy against lambda or depth");
  sweep_flags.add_to(*sweep);
  std::string sweep_param = "lambda";
  std::vector<double> sweep_values;
  sweep->add_option("--param", sweep_param, "Swept parameter")->check(CLI::IsMember({"lambda", "layers"}));
  sweep->add_option("--values", sweep_values, "Values (default: 0..1 step 0.1, or 1 2 3)");

  CLI::App* plot = app.add_subcommand("plot-data", "Homophily and attention CSVs for a finished run");
  std::string plot_report;
  std::size_t bins = 20;
  plot->add_option("--report", plot_report, "Run output directory")->required();
  plot->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  CLI::App* timing = app.add_subcommand("timing", "Phase timings of a finished run");
  std::string timing_dir;
  timing->add_option("--report", timing_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(generate_flags);
    if (*train) return cmd_train_source(train_flags, train_data, train_domains);
    if (*adapt_cmd) return cmd_adapt(adapt_flags, source_ckpts, target_path);
    if (*evaluate) return cmd_evaluate(eval_model, eval_data);
    if (*experiment) return cmd_experiment(experiment_flags);
    if (*ablate) return cmd_ablate(ablate_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_param, sweep_values);
    if (*plot) return cmd_plot_data(plot_report, bins);
    if (*timing) return cmd_timing(timing_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kExitTraining;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitTraining;
  } catch (const Error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
