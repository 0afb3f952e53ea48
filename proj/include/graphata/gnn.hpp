#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graphata/autodiff.hpp"
#include "graphata/graph.hpp"
#include "graphata/optim.hpp"
#include "graphata/split.hpp"

namespace graphata {

enum class Backbone { gcn, sage };
enum class TaskKind { node, graph };

std::string to_string(Backbone b);
std::string to_string(TaskKind t);
// Throw ConfigError on unknown names.
Backbone parse_backbone(const std::string& name);
TaskKind parse_task(const std::string& name);

// Everything a forward pass needs from the data, precomputed once. For graph
// tasks the corpus is batched as one disjoint union and `offsets` marks the
// node range of each graph.
struct GraphInput {
  TaskKind task = TaskKind::node;
  Tensor features;
  SparseMatrix norm_adjacency;  // D^{-1/2}(A+I)D^{-1/2}
  SparseMatrix neighbor_mean;   // self excluded, isolated -> self
  SparseMatrix neighbor_sum;    // self excluded, isolated -> self
  SparseMatrix adjacency;       // binary, no self-loops
  std::vector<std::size_t> offsets;

  static GraphInput from_graph(const Graph& g);
  static GraphInput from_corpus(const GraphCorpus& corpus);

  std::size_t num_nodes() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  // Rows of the logits: nodes for node tasks, graphs for graph tasks.
  std::size_t num_outputs() const { return task == TaskKind::node ? num_nodes() : offsets.size() - 1; }
};

// Width of the augmented input a layer's stacked matrix acts on.
//   gcn:  [ÃH | 1]       -> d_in + 1 rows
//   sage: [H | MH | 1]   -> 2·d_in + 1 rows, weight = [W_self; W_nbr; b]
std::size_t augmented_width(Backbone backbone, std::size_t d_in);
// Rows of the classifier matrix: [H_L | 1] (node) or [mean | max | 1] (graph).
std::size_t classifier_width(TaskKind task, std::size_t d_last);

// L message-passing layers followed by a linear classifier. Biases are the
// last row of every stacked matrix.
class GnnModel {
 public:
  GnnModel() = default;
  // dims = {d_0, d_1, ..., d_L}. Weights start at zero.
  GnnModel(Backbone backbone, TaskKind task, std::vector<std::size_t> dims, int num_classes);
  // Uniform in ±1/√d_in per layer.
  static GnnModel initialized(Backbone backbone, TaskKind task, std::vector<std::size_t> dims, int num_classes,
                              std::uint64_t seed);

  Backbone backbone() const { return backbone_; }
  TaskKind task() const { return task_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t num_layers() const { return layers_.size(); }
  int num_classes() const { return num_classes_; }

  Parameter& layer(std::size_t l) { return layers_[l]; }
  const Parameter& layer(std::size_t l) const { return layers_[l]; }
  Parameter& classifier() { return classifier_; }
  const Parameter& classifier() const { return classifier_; }
  std::vector<Parameter*> parameters();

  // Weights equal bit for bit.
  bool same_weights(const GnnModel& other) const;

 private:
  Backbone backbone_ = Backbone::gcn;
  TaskKind task_ = TaskKind::node;
  std::vector<std::size_t> dims_;
  int num_classes_ = 0;
  std::vector<Parameter> layers_;
  Parameter classifier_;
};

// Augmented layer input for the given backbone: [ÃH | 1] or [H | MH | 1].
Var propagate(Backbone backbone, const GraphInput& input, Var h);
// [H | 1] for node tasks, [mean | max | 1] per graph for graph tasks.
Var classifier_input(const GraphInput& input, Var h_last);

struct TapedForward {
  Var representations;  // n×d_L, no activation after the last layer
  Var logits;           // outputs×K
};
TapedForward gnn_forward(Tape& tape, GnnModel& model, const GraphInput& input);

struct ForwardOutput {
  Tensor representations;
  Tensor logits;
};
// Untaped convenience wrappers. gcn_forward/sage_forward also check the backbone.
ForwardOutput gnn_forward(const GnnModel& model, const GraphInput& input);
ForwardOutput gcn_forward(const GnnModel& model, const Graph& g);
ForwardOutput sage_forward(const GnnModel& model, const Graph& g);

// [column mean | column max] of an n×d matrix; throws UsageError for n = 0.
Tensor graph_readout(const Tensor& representations);

// Index of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& scores);
// Fraction of rows whose argmax equals the label. When `rows` is empty all
// rows are used. Throws UsageError on empty input, ShapeError on length mismatch.
double evaluate_accuracy(const Tensor& logits, std::span<const int> labels, std::span<const std::size_t> rows = {});

struct TrainOptions {
  int epochs = 200;
  AdamOptions adam{.learning_rate = 0.01, .weight_decay = 1e-4};
};

struct CheckpointMetadata {
  std::string source_name;
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

struct Checkpoint {
  GnnModel model;
  CheckpointMetadata metadata;
};

struct TrainResult {
  Checkpoint checkpoint;
  // Training-split loss at the start of each epoch.
  std::vector<double> train_loss;
};

// Cross-entropy on split.train with Adam for a fixed number of epochs. The
// parameters with the best validation accuracy are kept (earlier epoch on
// ties); the test accuracy of that snapshot goes into the metadata.
// Throws TrainingError on a non-finite loss.
TrainResult train_source(GnnModel model, const GraphInput& input, std::span<const int> labels, const Split& split,
                         const TrainOptions& options, const std::string& name = {}, std::uint64_t seed = 0);

}  // namespace graphata
