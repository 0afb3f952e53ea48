#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "graphata/errors.hpp"
#include "graphata/harness.hpp"
#include "graphata/rng.hpp"

namespace graphata {

std::string to_string(DataKind k) {
  switch (k) {
    case DataKind::csbm: return "csbm";
    case DataKind::files: return "files";
    case DataKind::density_corpus: return "density_corpus";
  }
  return "?";
}

DataKind parse_data_kind(const std::string& name) {
  if (name == "csbm") return DataKind::csbm;
  if (name == "files") return DataKind::files;
  if (name == "density_corpus") return DataKind::density_corpus;
  throw ConfigError("unknown data kind '" + name + "' (expected csbm, files or density_corpus)");
}

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kSplitStream = 3;

ExperimentConfig csbm_profile(std::size_t nodes_per_class, std::size_t feature_dim, std::size_t hidden, std::size_t r) {
  ExperimentConfig c;
  c.task = TaskKind::node;
  c.backbone = Backbone::gcn;
  c.data.kind = DataKind::csbm;
  c.data.csbm.num_classes = 4;
  c.data.csbm.nodes_per_class = nodes_per_class;
  c.data.csbm.intra_p = 0.04;
  c.data.csbm.feature_dim = feature_dim;
  c.data.csbm.class_means = default_class_means(4);
  const double qs[] = {0.012, 0.014, 0.016, 0.018};
  for (int i = 0; i < 4; ++i) c.data.domains.push_back({"C" + std::to_string(i + 1), qs[i], {}});
  c.sources = {"C1", "C2", "C3"};
  c.target = "C4";
  c.hidden = hidden;
  c.layers = 2;
  c.adaptation.r = r;
  return c;
}

}  // namespace

std::uint64_t data_seed(std::uint64_t seed, std::size_t domain) { return derive_seed(seed, kDataStream, domain); }
std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, kInitStream); }
std::uint64_t split_seed(std::uint64_t seed, std::size_t source) { return derive_seed(seed, kSplitStream, source); }

ExperimentConfig profile_config(const std::string& profile) {
  if (profile == "desk") {
    ExperimentConfig c = csbm_profile(500, 16, 32, 20);
    c.name = "csbm-desk";
    c.output_dir = "runs/csbm-desk";
    return c;
  }
  if (profile == "paper") {
    ExperimentConfig c = csbm_profile(2000, 128, 128, 40);
    c.name = "csbm-paper";
    c.output_dir = "runs/csbm-paper";
    return c;
  }
  throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
}

std::vector<std::string> ExperimentConfig::domain_names() const {
  if (data.kind == DataKind::density_corpus) return {"q1", "q2", "q3", "q4"};
  std::vector<std::string> names;
  for (const DomainSpec& d : data.domains) names.push_back(d.name);
  return names;
}

std::vector<std::size_t> ExperimentConfig::model_dims() const {
  std::size_t d = 0;
  switch (data.kind) {
    case DataKind::csbm: d = data.csbm.feature_dim; break;
    case DataKind::density_corpus: d = data.corpus.feature_dim; break;
    case DataKind::files: d = 0; break;  // known once the files are read
  }
  std::vector<std::size_t> dims{d};
  for (std::size_t l = 0; l < layers; ++l) dims.push_back(hidden);
  return dims;
}

void ExperimentConfig::validate() const {
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (source_training.epochs < 0) throw ConfigError("source_training.epochs must be >= 0");
  double ratio_sum = 0.0;
  for (double r : split_ratios) {
    if (r < 0.0) throw ConfigError("source_training.split ratios must be nonnegative");
    ratio_sum += r;
  }
  if (std::abs(ratio_sum - 1.0) > 1e-9) throw ConfigError("source_training.split ratios must sum to 1");
  adaptation.validate();

  if (data.kind == DataKind::csbm) {
    if (task != TaskKind::node) throw ConfigError("csbm data needs task 'node'");
    CsbmParams p = data.csbm;
    for (const DomainSpec& d : data.domains) {
      if (!d.inter_q) throw ConfigError("data.domains." + d.name + ": csbm domains need inter_q");
      p.inter_q = *d.inter_q;
      p.validate();
    }
  } else if (data.kind == DataKind::density_corpus) {
    if (task != TaskKind::graph) throw ConfigError("density_corpus data needs task 'graph'");
    data.corpus.validate();
  } else {
    for (const DomainSpec& d : data.domains)
      if (d.path.empty()) throw ConfigError("data.domains." + d.name + ": file domains need a path");
  }
  if (data.kind != DataKind::density_corpus && data.domains.empty()) throw ConfigError("data.domains is empty");

  const std::vector<std::string> names = domain_names();
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw ConfigError("domain names must be distinct");
  if (sources.empty()) throw ConfigError("at least one source domain is required");
  std::set<std::string> seen;
  for (const std::string& s : sources) {
    if (!unique.count(s)) throw ConfigError("source '" + s + "' is not a configured domain");
    if (!seen.insert(s).second) throw ConfigError("source '" + s + "' is listed twice");
  }
  if (!unique.count(target)) throw ConfigError("target '" + target + "' is not a configured domain");
  if (seen.count(target)) throw ConfigError("target '" + target + "' is also listed as a source");
}

// ---- JSON ----

namespace {

// Reads one object and remembers which keys were consumed so that leftovers
// (usually typos) can be reported.
class ObjectReader {
 public:
  ObjectReader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  template <typename T, typename Parse>
  void read_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    read(key, s);
    if (!s.empty()) {
      try {
        out = parse(s);
      } catch (const ConfigError& e) {
        throw ConfigError(field(key) + ": " + e.what());
      }
    }
  }

  const ordered_json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError(field(item.key()) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const ordered_json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ordered_json adaptation_to_json(const AdaptationConfig& a) {
  ordered_json j;
  j["mode"] = to_string(a.mode);
  j["normalizer"] = to_string(a.normalizer);
  j["context"] = to_string(a.pooling);
  j["context_scaling"] = to_string(a.scaling);
  j["lambda"] = a.lambda;
  j["gamma"] = a.gamma;
  j["r"] = a.r;
  j["epochs"] = a.epochs;
  j["lr"] = a.learning_rate;
  j["weight_decay"] = a.weight_decay;
  j["use_reg"] = a.use_reg;
  j["unfreeze_sources"] = a.unfreeze_sources;
  return j;
}

void adaptation_from_json(const ordered_json& j, const std::string& path, AdaptationConfig& a) {
  ObjectReader r(j, path);
  r.read_enum("mode", a.mode, parse_mode);
  r.read_enum("normalizer", a.normalizer, parse_normalizer);
  r.read_enum("context", a.pooling, parse_pooling);
  r.read_enum("context_scaling", a.scaling, parse_scaling);
  r.read("lambda", a.lambda);
  r.read("gamma", a.gamma);
  r.read("r", a.r);
  r.read("epochs", a.epochs);
  r.read("lr", a.learning_rate);
  r.read("weight_decay", a.weight_decay);
  r.read("use_reg", a.use_reg);
  r.read("unfreeze_sources", a.unfreeze_sources);
  r.finish();
}

}  // namespace

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["task"] = to_string(c.task);
  j["backbone"] = to_string(c.backbone);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  ordered_json data;
  data["kind"] = to_string(c.data.kind);
  if (c.data.kind == DataKind::csbm) {
    data["num_classes"] = c.data.csbm.num_classes;
    data["nodes_per_class"] = c.data.csbm.nodes_per_class;
    data["intra_p"] = c.data.csbm.intra_p;
    data["feature_dim"] = c.data.csbm.feature_dim;
    data["class_means"] = c.data.csbm.class_means;
  } else if (c.data.kind == DataKind::density_corpus) {
    const CorpusParams& p = c.data.corpus;
    data["num_classes"] = p.num_classes;
    data["num_graphs"] = p.num_graphs;
    data["min_nodes"] = p.min_nodes;
    data["max_nodes"] = p.max_nodes;
    data["feature_dim"] = p.feature_dim;
    data["min_edge_prob"] = p.min_edge_prob;
    data["max_edge_prob"] = p.max_edge_prob;
    data["signal"] = p.signal;
    data["density_shift"] = p.density_shift;
  }
  ordered_json domains = ordered_json::array();
  for (const DomainSpec& d : c.data.domains) {
    ordered_json dj;
    dj["name"] = d.name;
    if (d.inter_q) dj["inter_q"] = *d.inter_q;
    if (!d.path.empty()) dj["path"] = d.path;
    domains.push_back(dj);
  }
  if (c.data.kind != DataKind::density_corpus) data["domains"] = domains;
  j["data"] = data;
  j["sources"] = c.sources;
  j["target"] = c.target;
  j["model"] = {{"hidden", c.hidden}, {"layers", c.layers}};
  ordered_json st;
  st["epochs"] = c.source_training.epochs;
  st["lr"] = c.source_training.adam.learning_rate;
  st["weight_decay"] = c.source_training.adam.weight_decay;
  st["split"] = c.split_ratios;
  j["source_training"] = st;
  j["adaptation"] = adaptation_to_json(c.adaptation);
  j["save_artifacts"] = c.save_artifacts;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  std::string ignored_profile;
  r.read("profile", ignored_profile);
  r.read("name", c.name);
  r.read_enum("task", c.task, parse_task);
  r.read_enum("backbone", c.backbone, parse_backbone);
  r.read("seeds", c.seeds);
  r.read("output_dir", c.output_dir);
  if (r.has("data")) {
    ObjectReader d(r.child("data"), "data");
    d.read_enum("kind", c.data.kind, parse_data_kind);
    if (c.data.kind == DataKind::csbm) {
      d.read("num_classes", c.data.csbm.num_classes);
      d.read("nodes_per_class", c.data.csbm.nodes_per_class);
      d.read("intra_p", c.data.csbm.intra_p);
      d.read("feature_dim", c.data.csbm.feature_dim);
      c.data.csbm.class_means = default_class_means(c.data.csbm.num_classes);
      d.read("class_means", c.data.csbm.class_means);
    } else if (c.data.kind == DataKind::density_corpus) {
      CorpusParams& p = c.data.corpus;
      d.read("num_classes", p.num_classes);
      d.read("num_graphs", p.num_graphs);
      d.read("min_nodes", p.min_nodes);
      d.read("max_nodes", p.max_nodes);
      d.read("feature_dim", p.feature_dim);
      d.read("min_edge_prob", p.min_edge_prob);
      d.read("max_edge_prob", p.max_edge_prob);
      d.read("signal", p.signal);
      d.read("density_shift", p.density_shift);
    }
    if (d.has("domains")) {
      const ordered_json& list = d.child("domains");
      if (!list.is_array()) throw ConfigError("data.domains must be an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        ObjectReader dr(list[i], "data.domains[" + std::to_string(i) + "]");
        DomainSpec spec;
        dr.read("name", spec.name);
        double q = -1.0;
        if (dr.has("inter_q")) {
          dr.read("inter_q", q);
          spec.inter_q = q;
        }
        dr.read("path", spec.path);
        dr.finish();
        if (spec.name.empty()) throw ConfigError("data.domains[" + std::to_string(i) + "]: name is required");
        c.data.domains.push_back(spec);
      }
    }
    d.finish();
  }
  r.read("sources", c.sources);
  r.read("target", c.target);
  if (r.has("model")) {
    ObjectReader m(r.child("model"), "model");
    m.read("hidden", c.hidden);
    m.read("layers", c.layers);
    m.finish();
  }
  if (r.has("source_training")) {
    ObjectReader s(r.child("source_training"), "source_training");
    s.read("epochs", c.source_training.epochs);
    s.read("lr", c.source_training.adam.learning_rate);
    s.read("weight_decay", c.source_training.adam.weight_decay);
    s.read("split", c.split_ratios);
    s.finish();
  }
  if (r.has("adaptation")) adaptation_from_json(r.child("adaptation"), "adaptation", c.adaptation);
  r.read("save_artifacts", c.save_artifacts);
  r.read("threads", c.threads);
  r.finish();
  c.validate();
  return c;
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return ordered_json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::string>& profile) {
  const ordered_json file = read_json_file(path);
  if (!file.is_object()) throw ConfigError(path + ": top level must be an object");
  std::string base = "desk";
  if (file.contains("profile")) {
    if (!file.at("profile").is_string()) throw ConfigError(path + ": profile must be a string");
    base = file.at("profile").get<std::string>();
  }
  if (profile) base = *profile;
  ordered_json merged = config_to_json(profile_config(base));
  // Domain lists replace rather than merge.
  if (file.contains("data") && file.at("data").is_object() && file.at("data").contains("kind") &&
      file.at("data").at("kind") != merged["data"]["kind"]) {
    merged["data"] = ordered_json::object();
  }
  merged.merge_patch(file);
  try {
    return config_from_json(merged);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace graphata
