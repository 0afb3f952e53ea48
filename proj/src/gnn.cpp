#include "graphata/gnn.hpp"

#include <cmath>

#include "graphata/errors.hpp"
#include "graphata/rng.hpp"

namespace graphata {

std::string to_string(Backbone b) { return b == Backbone::gcn ? "gcn" : "sage"; }
std::string to_string(TaskKind t) { return t == TaskKind::node ? "node" : "graph"; }

Backbone parse_backbone(const std::string& name) {
  if (name == "gcn") return Backbone::gcn;
  if (name == "sage") return Backbone::sage;
  throw ConfigError("unknown backbone '" + name + "' (expected gcn or sage)");
}

TaskKind parse_task(const std::string& name) {
  if (name == "node") return TaskKind::node;
  if (name == "graph") return TaskKind::graph;
  throw ConfigError("unknown task '" + name + "' (expected node or graph)");
}

namespace {

GraphInput build_input(const Graph& g, TaskKind task, std::vector<std::size_t> offsets) {
  GraphInput input;
  input.task = task;
  input.features = g.features();
  input.norm_adjacency = normalized_adjacency(g);
  input.neighbor_mean = neighbor_mean_operator(g);
  input.neighbor_sum = neighbor_sum_operator(g);
  input.adjacency = g.adjacency();
  input.offsets = std::move(offsets);
  return input;
}

}  // namespace

GraphInput GraphInput::from_graph(const Graph& g) { return build_input(g, TaskKind::node, {}); }

GraphInput GraphInput::from_corpus(const GraphCorpus& corpus) {
  corpus.validate();
  const std::size_t d = corpus.feature_dim();
  std::vector<std::size_t> offsets{0};
  for (const Graph& g : corpus.graphs) offsets.push_back(offsets.back() + g.num_nodes());
  Tensor features({offsets.back(), d});
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Graph& g = corpus.graphs[i];
    const std::size_t base = offsets[i];
    std::copy(g.features().data().begin(), g.features().data().end(), features.data().begin() + base * d);
    for (const Edge& e : g.edges()) edges.push_back({e.u + base, e.v + base});
  }
  const Graph merged(offsets.back(), std::move(edges), std::move(features));
  return build_input(merged, TaskKind::graph, std::move(offsets));
}

std::size_t augmented_width(Backbone backbone, std::size_t d_in) {
  return (backbone == Backbone::gcn ? d_in : 2 * d_in) + 1;
}

std::size_t classifier_width(TaskKind task, std::size_t d_last) {
  return (task == TaskKind::node ? d_last : 2 * d_last) + 1;
}

GnnModel::GnnModel(Backbone backbone, TaskKind task, std::vector<std::size_t> dims, int num_classes)
    : backbone_(backbone), task_(task), dims_(std::move(dims)), num_classes_(num_classes) {
  if (dims_.size() < 2) throw UsageError("gnn: need at least one layer (dims = {d_0, ..., d_L})");
  if (num_classes_ < 1) throw UsageError("gnn: num_classes must be >= 1");
  for (std::size_t d : dims_)
    if (d == 0) throw UsageError("gnn: zero-width layer");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.emplace_back("layer" + std::to_string(l), Tensor({augmented_width(backbone_, dims_[l]), dims_[l + 1]}));
  }
  classifier_ = Parameter("classifier", Tensor({classifier_width(task_, dims_.back()),
                                                static_cast<std::size_t>(num_classes_)}));
}

GnnModel GnnModel::initialized(Backbone backbone, TaskKind task, std::vector<std::size_t> dims, int num_classes,
                               std::uint64_t seed) {
  GnnModel model(backbone, task, std::move(dims), num_classes);
  Rng rng(seed);
  auto fill = [&](Parameter& p, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : p.value.data()) w = rng.uniform(-bound, bound);
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) fill(model.layers_[l], model.dims_[l]);
  fill(model.classifier_, model.classifier_.value.rows() - 1);
  return model;
}

std::vector<Parameter*> GnnModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : layers_) out.push_back(&p);
  out.push_back(&classifier_);
  return out;
}

bool GnnModel::same_weights(const GnnModel& other) const {
  if (backbone_ != other.backbone_ || task_ != other.task_ || dims_ != other.dims_ ||
      num_classes_ != other.num_classes_)
    return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (!(layers_[l].value == other.layers_[l].value)) return false;
  return classifier_.value == other.classifier_.value;
}

Var propagate(Backbone backbone, const GraphInput& input, Var h) {
  if (backbone == Backbone::gcn) return append_ones_column(spmm(input.norm_adjacency, h));
  const Var parts[] = {h, spmm(input.neighbor_mean, h)};
  return append_ones_column(concat_cols(parts));
}

Var classifier_input(const GraphInput& input, Var h_last) {
  if (input.task == TaskKind::node) return append_ones_column(h_last);
  return append_ones_column(segment_mean_max(h_last, input.offsets));
}

TapedForward gnn_forward(Tape& tape, GnnModel& model, const GraphInput& input) {
  if (input.feature_dim() != model.dims().front()) {
    throw ShapeError("gnn: input has " + std::to_string(input.feature_dim()) + " features, model expects " +
                     std::to_string(model.dims().front()));
  }
  if (input.task != model.task()) throw UsageError("gnn: model task does not match input task");
  Var h = tape.constant(input.features);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Var z = matmul(propagate(model.backbone(), input, h), tape.parameter(model.layer(l)));
    h = l + 1 < model.num_layers() ? relu(z) : z;
  }
  Var logits = matmul(classifier_input(input, h), tape.parameter(model.classifier()));
  return {h, logits};
}

ForwardOutput gnn_forward(const GnnModel& model, const GraphInput& input) {
  // The taped path binds parameters mutably; a copy keeps the model const.
  GnnModel copy = model;
  Tape tape;
  const TapedForward out = gnn_forward(tape, copy, input);
  return {out.representations.value(), out.logits.value()};
}

ForwardOutput gcn_forward(const GnnModel& model, const Graph& g) {
  if (model.backbone() != Backbone::gcn) throw UsageError("gcn_forward called with a sage model");
  return gnn_forward(model, GraphInput::from_graph(g));
}

ForwardOutput sage_forward(const GnnModel& model, const Graph& g) {
  if (model.backbone() != Backbone::sage) throw UsageError("sage_forward called with a gcn model");
  return gnn_forward(model, GraphInput::from_graph(g));
}

Tensor graph_readout(const Tensor& representations) {
  if (representations.rank() != 2 || representations.rows() == 0) throw UsageError("graph_readout: empty graph");
  Tape tape;
  const std::size_t offsets[] = {0, representations.rows()};
  const Tensor pooled = segment_mean_max(tape.constant(representations), offsets).value();
  return pooled.reshaped({pooled.size()});
}

std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    out[r] = static_cast<int>(best);
  }
  return out;
}

double evaluate_accuracy(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  if (logits.rank() != 2 || logits.rows() != labels.size()) {
    throw ShapeError("evaluate_accuracy: logits " + shape_string(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty() || logits.cols() == 0) throw UsageError("evaluate_accuracy: empty input");
  const std::vector<int> predicted = argmax_rows(logits);
  std::size_t correct = 0, total = 0;
  if (rows.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
    total = labels.size();
  } else {
    for (std::size_t i : rows) correct += predicted.at(i) == labels[i];
    total = rows.size();
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

std::vector<Tensor> snapshot(GnnModel& model) {
  std::vector<Tensor> values;
  for (Parameter* p : model.parameters()) values.push_back(p->value);
  return values;
}

void restore(GnnModel& model, const std::vector<Tensor>& values) {
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainResult train_source(GnnModel model, const GraphInput& input, std::span<const int> labels, const Split& split,
                         const TrainOptions& options, const std::string& name, std::uint64_t seed) {
  if (labels.size() != input.num_outputs()) throw ShapeError("train_source: one label per output row required");
  if (split.train.empty()) throw UsageError("train_source: empty training split");
  for (int y : labels)
    if (y < 0 || y >= model.num_classes()) throw UsageError("train_source: label outside [0, K)");

  TrainResult result;
  CheckpointMetadata& meta = result.checkpoint.metadata;
  meta.source_name = name;
  meta.seed = seed;
  meta.epochs = options.epochs;

  const std::span<const std::size_t> val_rows = split.val.empty() ? std::span<const std::size_t>(split.train)
                                                                  : std::span<const std::size_t>(split.val);
  AdamState adam(options.adam);
  const std::vector<Parameter*> params = model.parameters();
  double best_val = -1.0;
  std::vector<Tensor> best = snapshot(model);

  // Epoch e evaluates the parameters after e updates, so epochs + 1 snapshots
  // are considered in total.
  for (int epoch = 0; epoch <= options.epochs; ++epoch) {
    Tape tape;
    const TapedForward out = gnn_forward(tape, model, input);
    const double val = evaluate_accuracy(out.logits.value(), labels, val_rows);
    if (val > best_val) {
      best_val = val;
      best = snapshot(model);
      meta.best_epoch = epoch;
    }
    if (epoch == options.epochs) break;
    const Var loss = softmax_cross_entropy(out.logits, labels, split.train);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw TrainingError("source training diverged at epoch " + std::to_string(epoch), epoch);
    }
    result.train_loss.push_back(loss_value);
    tape.backward(loss);
    adam.step(params);
  }

  restore(model, best);
  meta.val_accuracy = best_val;
  const ForwardOutput final_out = gnn_forward(model, input);
  meta.test_accuracy = split.test.empty() ? best_val : evaluate_accuracy(final_out.logits, labels, split.test);
  result.checkpoint.model = std::move(model);
  return result;
}

}  // namespace graphata
