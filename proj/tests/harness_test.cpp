#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "graphata/errors.hpp"
#include "graphata/harness.hpp"

namespace graphata {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() /
               ("graphata_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

// Four small CSBM domains; one seed takes well under a second.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = profile_config("desk");
  c.name = "tiny";
  c.data.csbm.nodes_per_class = 40;
  c.data.csbm.intra_p = 0.2;
  c.data.csbm.feature_dim = 6;
  for (std::size_t i = 0; i < c.data.domains.size(); ++i) c.data.domains[i].inter_q = 0.04 + 0.01 * i;
  c.hidden = 8;
  c.source_training.epochs = 30;
  c.adaptation.epochs = 8;
  c.adaptation.r = 5;
  c.seeds = {1, 2};
  c.output_dir = out.string();
  c.threads = 1;
  return c;
}

// ---- config ----

TEST(Config, DeskProfileMatchesAcceptanceSetting) {
  const ExperimentConfig c = profile_config("desk");
  EXPECT_EQ(c.data.csbm.num_classes, 4);
  EXPECT_EQ(c.data.csbm.nodes_per_class, 500u);
  EXPECT_EQ(c.data.csbm.feature_dim, 16u);
  EXPECT_EQ(c.hidden, 32u);
  EXPECT_EQ(c.layers, 2u);
  EXPECT_EQ(c.adaptation.r, 20u);
  EXPECT_EQ(c.sources, (std::vector<std::string>{"C1", "C2", "C3"}));
  EXPECT_EQ(c.target, "C4");
  EXPECT_EQ(c.seeds.size(), 3u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, PaperProfile) {
  const ExperimentConfig c = profile_config("paper");
  EXPECT_EQ(c.data.csbm.nodes_per_class, 2000u);
  EXPECT_EQ(c.data.csbm.feature_dim, 128u);
  EXPECT_EQ(c.hidden, 128u);
  EXPECT_EQ(c.adaptation.r, 40u);
  EXPECT_THROW(profile_config("laptop"), ConfigError);
}

TEST(Config, TargetAmongSourcesIsRejected) {
  ExperimentConfig c = profile_config("desk");
  c.sources.push_back("C4");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ValidationErrors) {
  auto bad = [](auto mutate) {
    ExperimentConfig c = profile_config("desk");
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.sources.clear(); }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.target = "C9"; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.sources = {"C1", "C7"}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.seeds.clear(); }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.seeds = {1, 1}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.layers = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.split_ratios = {0.5, 0.1, 0.1}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.adaptation.gamma = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](ExperimentConfig& c) { c.data.domains[0].inter_q.reset(); }).validate(), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = profile_config("desk");
  c.adaptation.mode = AtaMode::layer_centric;
  c.adaptation.normalizer = Normalizer::softmax;
  c.adaptation.pooling = ContextPooling::max;
  c.adaptation.lambda = 0.7;
  c.seeds = {5, 9};
  const ordered_json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
}

TEST(Config, UnknownKeyIsRejected) {
  ordered_json j = config_to_json(profile_config("desk"));
  j["adaptation"]["lamda"] = 0.3;
  EXPECT_THROW(config_from_json(j), ConfigError);
  ordered_json k = config_to_json(profile_config("desk"));
  k["model"]["hidden"] = "wide";
  EXPECT_THROW(config_from_json(k), ConfigError);
}

TEST(Config, FileOverridesProfileAndAllowsComments) {
  const fs::path dir = scratch_dir("cfg");
  fs::create_directories(dir);
  const fs::path path = dir / "c.json";
  std::ofstream(path) << "// desk with a different target\n"
                         "{\n"
                         "  \"profile\": \"desk\", /* base */\n"
                         "  \"sources\": [\"C2\", \"C3\", \"C4\"],\n"
                         "  \"target\": \"C1\",\n"
                         "  \"adaptation\": {\"lambda\": 0.5}\n"
                         "}\n";
  const ExperimentConfig c = load_config(path.string());
  EXPECT_EQ(c.target, "C1");
  EXPECT_DOUBLE_EQ(c.adaptation.lambda, 0.5);
  EXPECT_DOUBLE_EQ(c.adaptation.gamma, 0.9);
  EXPECT_EQ(c.data.csbm.nodes_per_class, 500u);
  EXPECT_EQ(load_config(path.string(), "paper").data.csbm.nodes_per_class, 2000u);
}

TEST(Config, MissingAndMalformedFiles) {
  const fs::path dir = scratch_dir("cfg");
  fs::create_directories(dir);
  EXPECT_THROW(load_config((dir / "absent.json").string()), IoError);
  std::ofstream(dir / "broken.json") << "{\"target\": ";
  EXPECT_THROW(load_config((dir / "broken.json").string()), ConfigError);
}

TEST(Config, SeedStreamsAreDistinct) {
  const std::vector<std::uint64_t> s{data_seed(1, 0), data_seed(1, 1), init_seed(1), split_seed(1, 0),
                                     split_seed(1, 1), data_seed(2, 0)};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) EXPECT_NE(s[i], s[j]) << i << ' ' << j;
}

TEST(Config, WorkerCount) {
  EXPECT_EQ(worker_count(4, 2), 2u);
  EXPECT_EQ(worker_count(1, 8), 1u);
  EXPECT_GE(worker_count(0, 8), 1u);
  ::setenv("GRAPHATA_THREADS", "1", 1);
  EXPECT_EQ(worker_count(4, 8), 1u);
  ::unsetenv("GRAPHATA_THREADS");
}

// ---- pipeline ----

TEST(Domains, CsbmDomainsFollowConfig) {
  const ExperimentConfig c = tiny_config(scratch_dir("x"));
  const std::vector<Domain> d = build_domains(c, 1);
  ASSERT_EQ(d.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(d[i].name, "C" + std::to_string(i + 1));
    EXPECT_EQ(d[i].input.num_nodes(), 160u);
    EXPECT_EQ(d[i].input.feature_dim(), 6u);
  }
  // Same seed, same data; other seed, other data.
  EXPECT_EQ(max_abs_diff(build_domains(c, 1)[2].input.features, d[2].input.features), 0.0);
  EXPECT_GT(max_abs_diff(build_domains(c, 2)[2].input.features, d[2].input.features), 0.0);
}

TEST(Domains, DensityCorpusGivesFourQuartiles) {
  ExperimentConfig c;
  c.task = TaskKind::graph;
  c.data.kind = DataKind::density_corpus;
  c.data.corpus.num_graphs = 80;
  c.sources = {"q1", "q2", "q3"};
  c.target = "q4";
  c.validate();
  const std::vector<Domain> d = build_domains(c, 3);
  ASSERT_EQ(d.size(), 4u);
  std::size_t total = 0;
  for (const Domain& dom : d) {
    ASSERT_TRUE(dom.corpus.has_value());
    total += dom.labels.size();
  }
  EXPECT_EQ(total, 80u);
}

TEST(Experiment, ReportShapeAndArtifacts) {
  const fs::path out = scratch_dir("run");
  const RunReport r = run_experiment(tiny_config(out));
  ASSERT_EQ(r.seeds.size(), 2u);
  EXPECT_EQ(r.exit_code(), 0);
  for (const SeedResult& s : r.seeds) {
    EXPECT_TRUE(s.ok) << s.error;
    EXPECT_EQ(s.source_test_accuracy.size(), 3u);
    EXPECT_EQ(s.history.size(), 8u);
    EXPECT_EQ(s.num_nodes, 160u);
    EXPECT_GT(s.peak_bytes, 0u);
  }
  ASSERT_FALSE(r.artifacts.empty());
  for (const std::string& a : r.artifacts) EXPECT_TRUE(fs::exists(out / a)) << a;
}

TEST(Experiment, MeanAndStdRecomputeFromSeedRows) {
  const RunReport r = run_experiment(tiny_config(scratch_dir("run")));
  std::vector<double> acc;
  for (const SeedResult& s : r.seeds) acc.push_back(s.target_accuracy);
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  EXPECT_LT(std::abs(r.target.mean - mean), 1e-12);
  EXPECT_LT(std::abs(r.target.std - std::sqrt(ss / acc.size())), 1e-12);

  // The same from the files on disk.
  const RunReport loaded = load_report(r.config.output_dir);
  EXPECT_EQ(loaded.seeds.size(), r.seeds.size());
  EXPECT_LT(std::abs(loaded.target.mean - mean), 1e-12);
  for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_EQ(loaded.seeds[i].target_accuracy, acc[i]);
}

TEST(Experiment, SingleSeedHasZeroStd) {
  ExperimentConfig c = tiny_config(scratch_dir("run"));
  c.seeds = {7};
  const RunReport r = run_experiment(c);
  EXPECT_EQ(r.target.count, 1u);
  EXPECT_EQ(r.target.std, 0.0);
}

TEST(Experiment, IdenticalConfigsGiveIdenticalCsvs) {
  ExperimentConfig a = tiny_config(scratch_dir("a"));
  ExperimentConfig b = tiny_config(scratch_dir("b"));
  b.threads = 2;
  run_experiment(a);
  run_experiment(b);
  for (const char* f : {"summary.csv", "metrics.csv"}) {
    const std::string x = slurp(fs::path(a.output_dir) / f);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp(fs::path(b.output_dir) / f)) << f;
  }
  EXPECT_EQ(slurp(fs::path(a.output_dir) / "seed_1" / "ata.ckpt"), slurp(fs::path(b.output_dir) / "seed_1" / "ata.ckpt"));
}

TEST(Experiment, FailingSeedsAreRecorded) {
  ExperimentConfig c = tiny_config(scratch_dir("run"));
  c.data.kind = DataKind::files;
  for (DomainSpec& d : c.data.domains) d.path = (fs::path(c.output_dir) / "missing" / (d.name + ".graph")).string();
  const RunReport r = run_experiment(c);
  ASSERT_EQ(r.seeds.size(), 2u);
  for (const SeedResult& s : r.seeds) {
    EXPECT_FALSE(s.ok);
    EXPECT_EQ(s.error_code, 4);
    EXPECT_FALSE(s.error.empty());
  }
  EXPECT_EQ(r.exit_code(), 4);
  EXPECT_EQ(r.target.count, 0u);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "report.json"));
}

TEST(Experiment, FileDomainsMatchGeneratedOnes) {
  const fs::path out = scratch_dir("gen");
  ExperimentConfig gen = tiny_config(out / "gen");
  gen.seeds = {4};
  const RunReport first = run_experiment(gen);

  ExperimentConfig files = gen;
  files.output_dir = (out / "files").string();
  files.data.kind = DataKind::files;
  for (DomainSpec& d : files.data.domains) d.path = (out / "gen" / "seed_4" / (d.name + ".graph")).string();
  const RunReport second = run_experiment(files);
  ASSERT_TRUE(second.seeds[0].ok) << second.seeds[0].error;
  EXPECT_EQ(second.seeds[0].target_accuracy, first.seeds[0].target_accuracy);
  EXPECT_EQ(second.seeds[0].ensemble_accuracy, first.seeds[0].ensemble_accuracy);
}

TEST(Experiment, GraphTaskRuns) {
  ExperimentConfig c;
  c.task = TaskKind::graph;
  c.data.kind = DataKind::density_corpus;
  c.data.corpus.num_graphs = 80;
  c.sources = {"q1", "q2", "q3"};
  c.target = "q4";
  c.hidden = 8;
  c.source_training.epochs = 20;
  c.adaptation.epochs = 5;
  c.adaptation.r = 5;
  c.seeds = {1};
  c.output_dir = scratch_dir("run").string();
  const RunReport r = run_experiment(c);
  ASSERT_TRUE(r.seeds[0].ok) << r.seeds[0].error;
  EXPECT_GE(r.seeds[0].target_accuracy, 0.0);
  EXPECT_LE(r.seeds[0].target_accuracy, 1.0);
}

// ---- ablation and sweeps ----

TEST(Ablation, VariantSet) {
  const std::vector<AblationVariant> v = ablation_variants(AdaptationConfig{});
  std::vector<std::string> names;
  for (const AblationVariant& a : v) names.push_back(a.name);
  EXPECT_EQ(names, (std::vector<std::string>{"node_sparsemax", "node_softmax", "layer_sparsemax", "layer_softmax",
                                             "model_sparsemax", "model_softmax", "node_sparsemax_max",
                                             "node_sparsemax_min", "node_sparsemax_sum", "node_sparsemax_no_reg"}));
  EXPECT_FALSE(v.back().adaptation.use_reg);
}

TEST(Ablation, SoftmaxIsDenseAndMeanContextMatchesDefault) {
  ExperimentConfig c = tiny_config(scratch_dir("abl"));
  c.seeds = {3};
  const AblationReport abl = run_ablation(c, ablation_variants(c.adaptation));
  ASSERT_EQ(abl.rows.size(), 10u);
  const double m = static_cast<double>(c.sources.size());
  for (const AblationRow& row : abl.rows) {
    ASSERT_TRUE(row.seeds[0].ok) << row.variant << ": " << row.seeds[0].error;
    if (row.adaptation.normalizer == Normalizer::softmax) EXPECT_EQ(row.support.mean, m) << row.variant;
    EXPECT_GE(row.support.mean, 1.0);
    EXPECT_LE(row.support.mean, m);
  }
  ExperimentConfig plain = c;
  plain.output_dir = scratch_dir("plain").string();
  const RunReport r = run_experiment(plain);
  EXPECT_EQ(abl.rows[0].seeds[0].target_accuracy, r.seeds[0].target_accuracy);
  EXPECT_EQ(abl.rows[0].seeds[0].support_mean, r.seeds[0].support_mean);
  EXPECT_EQ(metrics_csv(abl.rows[0].seeds), slurp(fs::path(plain.output_dir) / "metrics.csv"));

  const std::string table = slurp(fs::path(c.output_dir) / "ablation.csv");
  EXPECT_EQ(line_count(table), 1u + 10u + 1u);
}

TEST(Sweep, LambdaTableHasOneRowPerValue) {
  ExperimentConfig c = tiny_config(scratch_dir("sweep"));
  c.seeds = {1};
  const std::vector<SweepPoint> p = sweep_lambda(c, {0.0, 0.2, 1.0});
  ASSERT_EQ(p.size(), 3u);
  for (const SweepPoint& s : p) EXPECT_TRUE(s.seeds[0].ok);
  const std::string csv = sweep_csv("lambda", p);
  EXPECT_EQ(line_count(csv), 4u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,mean_accuracy,std_accuracy,failed_seeds,seed_1");
}

TEST(Sweep, LayersRetrainSources) {
  ExperimentConfig c = tiny_config(scratch_dir("sweep"));
  c.seeds = {1};
  const std::vector<SweepPoint> p = sweep_layers(c, {1, 3});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].seeds[0].history.size(), 8u);
  EXPECT_NE(p[0].seeds[0].source_test_accuracy, p[1].seeds[0].source_test_accuracy);
}

// ---- plot data and timing ----

TEST(PlotData, HomophilyRowsAreBinsTimesDomains) {
  const ExperimentConfig c = tiny_config(scratch_dir("x"));
  const std::vector<Domain> d = build_domains(c, 1);
  for (std::size_t bins : {1u, 7u, 20u}) {
    const std::string csv = homophily_histogram_csv(d, bins);
    EXPECT_EQ(line_count(csv), 1 + bins * d.size());
  }
  EXPECT_THROW(homophily_histogram_csv(d, 0), UsageError);
}

TEST(PlotData, AttentionRowsAreDistributions) {
  ExperimentConfig c = tiny_config(scratch_dir("run"));
  c.seeds = {2};
  run_experiment(c);
  const std::vector<std::string> files = emit_plot_data(c.output_dir, 10);
  EXPECT_EQ(files, (std::vector<std::string>{"homophily.csv", "attention.csv"}));
  EXPECT_EQ(line_count(slurp(fs::path(c.output_dir) / "homophily.csv")), 1u + 10u * 4u);

  std::ifstream in(fs::path(c.output_dir) / "attention.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "node,stage,w1,w2,w3");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    double sum = 0.0;
    std::size_t cols = 0;
    while (std::getline(ss, field, ',')) {
      const double w = std::stod(field);
      EXPECT_GE(w, 0.0);
      sum += w;
      ++cols;
    }
    EXPECT_EQ(cols, 3u);
    EXPECT_NEAR(sum, 1.0, 1e-9);
    ++rows;
  }
  // Nodes × (extractor layers + classifier).
  EXPECT_EQ(rows, 160u * 3u);
}

TEST(PlotData, SharedAttentionIsRepeatedPerNode) {
  AtaOutput out;
  out.attention = {Tensor::matrix({{0.25, 0.75}}), Tensor::matrix({{1.0, 0.0}, {0.5, 0.5}, {0.0, 1.0}})};
  const std::string csv = attention_csv(out);
  EXPECT_EQ(line_count(csv), 1u + 3u * 2u);
  EXPECT_NE(csv.find("2,0,0.25,0.75\n"), std::string::npos);
}

TEST(Timing, EmptyRunGivesHeaderOnly) {
  RunReport empty;
  const std::string t = timing_report(empty);
  EXPECT_EQ(line_count(t), 1u);
}

TEST(Timing, PhasesFitInTotal) {
  ExperimentConfig c = tiny_config(scratch_dir("run"));
  c.seeds = {1};
  const RunReport r = run_experiment(c);
  const PhaseTimings& t = r.seeds[0].timings;
  EXPECT_LE(t.generate + t.train_sources + t.adapt + t.evaluate, t.total);
  EXPECT_LE(t.total, r.wall_seconds);
  const std::string table = timing_report(r);
  EXPECT_EQ(line_count(table), 2u);
  EXPECT_NE(table.find(" 160 "), std::string::npos);
}

// Adaptation cost grows less than quadratically in n at fixed degree: the
// kNN scan is the only n² term, so doubling n stays under 3× with 1.5× slack.
TEST(Timing, DoublingNodesIsSubQuadratic) {
  auto epoch_seconds = [](std::size_t per_class) {
    ExperimentConfig c = profile_config("desk");
    c.data.csbm.nodes_per_class = per_class;
    // Constant expected degree.
    c.data.csbm.intra_p = 0.04 * 500.0 / static_cast<double>(per_class);
    for (std::size_t i = 0; i < c.data.domains.size(); ++i)
      c.data.domains[i].inter_q = (0.012 + 0.002 * i) * 500.0 / static_cast<double>(per_class);
    c.source_training.epochs = 5;
    c.adaptation.epochs = 4;
    const PreparedSeed p = prepare_seed(c, 1);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      adapt(p.source_models(), p.target().input, c.adaptation);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
  };
  const double small = epoch_seconds(250);
  const double large = epoch_seconds(500);
  EXPECT_LT(large / small, 3.0 * 1.5) << small << " s vs " << large << " s";
}

}  // namespace
}  // namespace graphata
