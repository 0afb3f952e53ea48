#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphata/ata.hpp"
#include "graphata/csbm.hpp"
#include "graphata/gnn.hpp"

namespace graphata {

using ordered_json = nlohmann::ordered_json;

// One named domain. CSBM domains set inter_q (the remaining parameters are
// shared); file domains set path (a graph file for node tasks, a corpus
// manifest for graph tasks). Density-split corpora name their domains
// q1..q4 and need no entries.
struct DomainSpec {
  std::string name;
  std::optional<double> inter_q;
  std::string path;
};

enum class DataKind { csbm, files, density_corpus };
std::string to_string(DataKind k);
DataKind parse_data_kind(const std::string& name);

struct DataSpec {
  DataKind kind = DataKind::csbm;
  CsbmParams csbm;      // kind csbm; inter_q and seed are set per domain and seed
  CorpusParams corpus;  // kind density_corpus; seed is set per run seed
  std::vector<DomainSpec> domains;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TaskKind task = TaskKind::node;
  Backbone backbone = Backbone::gcn;
  DataSpec data;
  std::vector<std::string> sources;
  std::string target;
  std::size_t hidden = 32;
  std::size_t layers = 2;
  TrainOptions source_training;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  AdaptationConfig adaptation;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "runs/experiment";
  bool save_artifacts = true;
  // Seeds run in parallel up to this many threads; 0 means one per core.
  // GRAPHATA_THREADS caps it further.
  unsigned threads = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::vector<std::string> domain_names() const;
  std::vector<std::size_t> model_dims() const;
};

// Built-in defaults. "desk" is the small CSBM setting used by the acceptance
// suite; "paper" is the full-size CSBM setting.
ExperimentConfig profile_config(const std::string& profile);
ordered_json config_to_json(const ExperimentConfig& config);
// Reads every field strictly: unknown keys and wrong types are ConfigErrors.
ExperimentConfig config_from_json(const ordered_json& j);
// Applies the file on top of a profile. The file may name its own profile
// with a "profile" key; an explicit profile argument wins over it.
ExperimentConfig load_config(const std::string& path, const std::optional<std::string>& profile = std::nullopt);
// JSON with // and /* */ comments.
ordered_json read_json_file(const std::string& path);

// Seeds for the independent generators of one run seed.
std::uint64_t data_seed(std::uint64_t seed, std::size_t domain);
std::uint64_t init_seed(std::uint64_t seed);
std::uint64_t split_seed(std::uint64_t seed, std::size_t source);

struct Domain {
  std::string name;
  GraphInput input;
  std::vector<int> labels;  // per node (node task) or per graph
  std::optional<Graph> graph;          // node task
  std::optional<GraphCorpus> corpus;   // graph task
};
// Generates or loads every domain named in the config for one run seed.
std::vector<Domain> build_domains(const ExperimentConfig& config, std::uint64_t seed);

struct PhaseTimings {
  double generate = 0.0;
  double train_sources = 0.0;
  double adapt = 0.0;
  double evaluate = 0.0;
  double total = 0.0;
};

// Everything that adaptation variants of one seed share.
struct PreparedSeed {
  std::uint64_t seed = 0;
  std::vector<Domain> domains;
  std::size_t target_index = 0;
  std::vector<Checkpoint> sources;
  std::vector<double> source_test_accuracy;
  std::vector<double> source_target_accuracy;
  double ensemble_accuracy = 0.0;
  PhaseTimings timings;
  std::size_t peak_bytes = 0;

  const Domain& target() const { return domains[target_index]; }
  std::vector<GnnModel> source_models() const;
};
PreparedSeed prepare_seed(const ExperimentConfig& config, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int error_code = 0;  // CLI exit code class of the failure
  std::vector<double> source_test_accuracy;
  std::vector<double> source_target_accuracy;
  double ensemble_accuracy = 0.0;
  double initial_accuracy = 0.0;
  double target_accuracy = 0.0;
  double support_mean = 0.0;
  std::vector<EpochMetrics> history;
  PhaseTimings timings;
  std::size_t peak_bytes = 0;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
};

// Adapts on a prepared seed and evaluates on the whole target domain. When
// model_path is non-empty the adapted model is saved there.
SeedResult adapt_prepared(const PreparedSeed& prepared, const AdaptationConfig& adaptation,
                          const std::string& model_path = {});

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population std over successful seeds; 0 for one seed
  std::size_t count = 0;
};
Aggregate aggregate(const std::vector<double>& values);

struct RunReport {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  Aggregate target;
  Aggregate ensemble;
  double wall_seconds = 0.0;
  std::vector<std::string> artifacts;  // paths relative to the output directory

  // 0 when every seed succeeded, else the first failure's exit code.
  int exit_code() const;
};

// Runs every seed (in parallel when allowed) and writes report.json,
// summary.csv, metrics.csv and per-seed artifacts under config.output_dir.
RunReport run_experiment(const ExperimentConfig& config);

// CSV renderings. They contain no timings, so equal configs give equal bytes.
std::string summary_csv(const std::vector<SeedResult>& seeds);
std::string metrics_csv(const std::vector<SeedResult>& seeds);
ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const ordered_json& j);
RunReport load_report(const std::string& directory);

struct AblationVariant {
  std::string name;
  AdaptationConfig adaptation;
};
// Modes × normalizers, the pooling variants, and the run without L_reg.
std::vector<AblationVariant> ablation_variants(const AdaptationConfig& base);

struct AblationRow {
  std::string variant;
  AdaptationConfig adaptation;
  std::vector<SeedResult> seeds;
  Aggregate target;
  Aggregate support;
};
struct AblationReport {
  ExperimentConfig config;
  std::vector<AblationRow> rows;
  std::vector<Aggregate> ensemble;
};
// Shares data and sources across variants within each seed. Writes
// ablation.csv and per-variant metrics under config.output_dir.
AblationReport run_ablation(const ExperimentConfig& config, const std::vector<AblationVariant>& variants);
std::string ablation_csv(const AblationReport& report);

struct SweepPoint {
  double value = 0.0;
  std::vector<SeedResult> seeds;
  Aggregate target;
};
// λ sweep reuses sources per seed; the depth sweep retrains sources for each L.
std::vector<SweepPoint> sweep_lambda(const ExperimentConfig& config, const std::vector<double>& lambdas);
std::vector<SweepPoint> sweep_layers(const ExperimentConfig& config, const std::vector<std::size_t>& depths);
std::string sweep_csv(const std::string& parameter, const std::vector<SweepPoint>& points);

// Plot data: homophily histograms per domain, attention weights per node
// and stage for the target of one seed. Returns the files written.
std::string homophily_histogram_csv(const std::vector<Domain>& domains, std::size_t bins);
std::string attention_csv(const AtaOutput& output);
std::vector<std::string> emit_plot_data(const std::string& report_dir, std::size_t bins = 20);

// Text table of phase timings with the problem sizes next to them.
std::string timing_report(const RunReport& report);

// Writes text to a file, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// min(requested or hardware concurrency, GRAPHATA_THREADS, jobs), at least 1.
unsigned worker_count(unsigned requested, std::size_t jobs);

}  // namespace graphata
