#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphata/autodiff.hpp"
#include "graphata/gnn.hpp"

namespace graphata {

enum class AtaMode { node_centric, layer_centric, model_centric };
enum class Normalizer { sparsemax, softmax };
enum class ContextPooling { mean, max, min, sum };
// How the context enters the per-node matrix. `diag` scales row j of every
// source matrix by c_v[j]; `none` uses the context for the attention scores only.
enum class ContextScaling { none, diag };

std::string to_string(AtaMode m);
std::string to_string(Normalizer n);
std::string to_string(ContextPooling p);
std::string to_string(ContextScaling s);
// Throw ConfigError on unknown names. Modes accept "node", "layer", "model"
// as well as the *_centric forms.
AtaMode parse_mode(const std::string& name);
Normalizer parse_normalizer(const std::string& name);
ContextPooling parse_pooling(const std::string& name);
ContextScaling parse_scaling(const std::string& name);

struct AtaOptions {
  AtaMode mode = AtaMode::node_centric;
  Normalizer normalizer = Normalizer::sparsemax;
  ContextPooling pooling = ContextPooling::mean;
  ContextScaling scaling = ContextScaling::none;
  double lambda = 0.2;
  bool trainable_sources = false;
  // Debug switches used to check the degenerate cases.
  bool force_unit_context = false;
  bool drop_global = false;
};

// Throws UsageError unless the models agree on backbone, task, dims and K.
void validate_ensemble(std::span<const GnnModel> sources);

// Trainable per-layer state: attention vector a (d_out×1) and global matrix
// W_g with the source matrices' shape. Index L is the classifier.
struct AtaLayer {
  Parameter attention;
  Parameter global;
};

class AtaModel {
 public:
  AtaModel() = default;
  // a = 0 (uniform attention at the start), W_g = mean of the source matrices,
  // model-centric scores = 0.
  AtaModel(std::vector<GnnModel> sources, AtaOptions options);

  const AtaOptions& options() const { return options_; }
  AtaOptions& options() { return options_; }
  std::size_t num_sources() const { return sources_.size(); }
  // Extractor layers plus classifier.
  std::size_t num_stages() const { return stages_.size(); }
  const GnnModel& source(std::size_t i) const { return sources_[i]; }
  GnnModel& source(std::size_t i) { return sources_[i]; }
  const GnnModel& reference() const { return sources_.front(); }
  AtaLayer& stage(std::size_t l) { return stages_[l]; }
  const AtaLayer& stage(std::size_t l) const { return stages_[l]; }
  Parameter& model_scores() { return model_scores_; }
  const Parameter& model_scores() const { return model_scores_; }

  // Source matrix i at stage l (classifier when l == num_layers).
  Parameter& source_matrix(std::size_t i, std::size_t l);
  const Parameter& source_matrix(std::size_t i, std::size_t l) const;

  // Parameters updated by adaptation for the current mode.
  std::vector<Parameter*> trainable_parameters();

 private:
  std::vector<GnnModel> sources_;
  AtaOptions options_;
  std::vector<AtaLayer> stages_;
  Parameter model_scores_;
};

// Per-node pieces of the construction, written for a single node.
// C = M·H.
Tensor local_context(const Tensor& h_prev, const SparseMatrix& neighbor_mean);
// raw_i = a · (W_iᵀ c).
std::vector<double> attention_scores(std::span<const double> c, std::span<const Tensor* const> sources,
                                     std::span<const double> a);
// Σ_i α_i diag(c) W_i + λ W_g.
Tensor aggregate_weight(std::span<const double> c, std::span<const double> alphas,
                        std::span<const Tensor* const> sources, const Tensor& global, double lambda);

struct AtaTapedForward {
  Var representations;  // per sample: node rows, or pooled rows for graph tasks
  Var probabilities;    // outputs×K, rows on the simplex
  // Attention weights per stage: n×m for node-centric stages, 1×m for shared ones.
  std::vector<Tensor> attention;
};
AtaTapedForward ata_forward(Tape& tape, AtaModel& model, const GraphInput& input);

struct AtaOutput {
  Tensor representations;
  Tensor probabilities;
  std::vector<Tensor> attention;
};
AtaOutput ata_forward(const AtaModel& model, const GraphInput& input);

// Average number of nonzero weights per attention row, over all stages.
double support_mean(const std::vector<Tensor>& attention);

// Uniform average of the frozen sources' softmax predictions.
Tensor ensemble_predict(std::span<const GnnModel> sources, const GraphInput& input);

// Momentum-smoothed stores of representations R and predictions P.
class MemoryBanks {
 public:
  MemoryBanks(Tensor representations, Tensor predictions, double gamma);

  // R ← (1−γ)R + γh, P ← (1−γ)P + γp. p rows must be distributions.
  void update(const Tensor& h, const Tensor& p);

  const Tensor& representations() const { return r_; }
  const Tensor& predictions() const { return p_; }
  double gamma() const { return gamma_; }

 private:
  Tensor r_;
  Tensor p_;
  double gamma_;
};

// Throws NumericError unless every row is nonnegative and sums to 1 ± tol.
void check_distribution_rows(const Tensor& p, double tol, const char* what);

struct PseudoLabels {
  Tensor one_hot;                                 // n×K
  std::vector<int> labels;                        // argmax per row
  std::vector<std::vector<std::size_t>> neighbors;  // r indices per row, most similar first
};

// For each i, the r bank rows most cosine-similar to h_i (excluding i; ties
// to the lower index), labelled by argmax of their mean bank prediction
// (ties to the lower class). Works row by row; no n×n matrix is formed.
PseudoLabels knn_pseudo_labels(const MemoryBanks& banks, const Tensor& h, std::size_t r);

// −(1/n) Σ ŷ log max(p, 1e-12). ŷ is a constant.
Var loss_cls(Var p, const Tensor& y_hat);
// (1/n) Σ_i H(p_i) − H(mean_i p_i), logs clamped at 1e-12.
Var loss_reg(Var p);

struct AdaptationConfig {
  double lambda = 0.2;
  double gamma = 0.9;
  std::size_t r = 40;
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  AtaMode mode = AtaMode::node_centric;
  Normalizer normalizer = Normalizer::sparsemax;
  ContextPooling pooling = ContextPooling::mean;
  ContextScaling scaling = ContextScaling::none;
  bool use_reg = true;
  bool unfreeze_sources = false;

  // Throws ConfigError on out-of-range values.
  void validate() const;
  AtaOptions ata_options() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss_cls = 0.0;
  double loss_reg = 0.0;
  double loss_total = 0.0;
  std::optional<double> accuracy;
  double support_mean = 0.0;
};

struct AdaptResult {
  AtaModel model;
  std::vector<EpochMetrics> history;
  // r actually used after capping at n − 1.
  std::size_t effective_r = 0;
};

// Builds the AtaModel, seeds the banks with one forward pass, then per epoch:
// forward, bank update, pseudo-labels, L_cls (+ L_reg), one Adam step.
// eval_labels (optional) are used only for the accuracy column.
// Throws TrainingError with the epoch index on a non-finite loss.
AdaptResult adapt(std::vector<GnnModel> sources, const GraphInput& target, const AdaptationConfig& config,
                  std::span<const int> eval_labels = {});

// Writes the metrics history as CSV with a fixed column order.
std::string history_csv(const std::vector<EpochMetrics>& history);

// The gnn checkpoint format with kind "ata": per-source matrices plus the
// attention, global and model-score arrays, and the options in the header.
void save_ata_model(const AtaModel& model, const std::string& path);
AtaModel load_ata_model(const std::string& path);

}  // namespace graphata
