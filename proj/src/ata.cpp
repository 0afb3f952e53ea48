#include "graphata/ata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "graphata/errors.hpp"
#include "graphata/sparsemax.hpp"
#include "graphata/text.hpp"

namespace graphata {

std::string to_string(AtaMode m) {
  switch (m) {
    case AtaMode::node_centric: return "node_centric";
    case AtaMode::layer_centric: return "layer_centric";
    case AtaMode::model_centric: return "model_centric";
  }
  return "?";
}

std::string to_string(Normalizer n) { return n == Normalizer::sparsemax ? "sparsemax" : "softmax"; }

std::string to_string(ContextPooling p) {
  switch (p) {
    case ContextPooling::mean: return "mean";
    case ContextPooling::max: return "max";
    case ContextPooling::min: return "min";
    case ContextPooling::sum: return "sum";
  }
  return "?";
}

std::string to_string(ContextScaling s) { return s == ContextScaling::none ? "none" : "diag"; }

AtaMode parse_mode(const std::string& name) {
  if (name == "node" || name == "node_centric") return AtaMode::node_centric;
  if (name == "layer" || name == "layer_centric") return AtaMode::layer_centric;
  if (name == "model" || name == "model_centric") return AtaMode::model_centric;
  throw ConfigError("unknown mode '" + name + "' (expected node, layer or model)");
}

Normalizer parse_normalizer(const std::string& name) {
  if (name == "sparsemax") return Normalizer::sparsemax;
  if (name == "softmax") return Normalizer::softmax;
  throw ConfigError("unknown normalizer '" + name + "' (expected sparsemax or softmax)");
}

ContextPooling parse_pooling(const std::string& name) {
  if (name == "mean") return ContextPooling::mean;
  if (name == "max") return ContextPooling::max;
  if (name == "min") return ContextPooling::min;
  if (name == "sum") return ContextPooling::sum;
  throw ConfigError("unknown context pooling '" + name + "' (expected mean, max, min or sum)");
}

ContextScaling parse_scaling(const std::string& name) {
  if (name == "none") return ContextScaling::none;
  if (name == "diag") return ContextScaling::diag;
  throw ConfigError("unknown context scaling '" + name + "' (expected none or diag)");
}

void validate_ensemble(std::span<const GnnModel> sources) {
  if (sources.empty()) throw UsageError("ensemble: at least one source model is required");
  const GnnModel& ref = sources.front();
  for (std::size_t i = 1; i < sources.size(); ++i) {
    const GnnModel& s = sources[i];
    if (s.backbone() != ref.backbone() || s.task() != ref.task() || s.dims() != ref.dims() ||
        s.num_classes() != ref.num_classes()) {
      throw UsageError("ensemble: source " + std::to_string(i) + " does not match the shape of source 0");
    }
  }
}

AtaModel::AtaModel(std::vector<GnnModel> sources, AtaOptions options)
    : sources_(std::move(sources)), options_(options) {
  validate_ensemble(sources_);
  if (options_.lambda < 0.0 || options_.lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  const std::size_t m = sources_.size();
  for (std::size_t l = 0; l <= reference().num_layers(); ++l) {
    const Tensor& shape = source_matrix(0, l).value;
    const std::string prefix = l < reference().num_layers() ? "stage" + std::to_string(l) : "classifier";
    Tensor mean(shape.shape());
    for (std::size_t i = 0; i < m; ++i) add_inplace(mean, source_matrix(i, l).value, 1.0 / static_cast<double>(m));
    stages_.push_back({Parameter(prefix + ".attention", Tensor({shape.cols(), 1})),
                       Parameter(prefix + ".global", std::move(mean))});
  }
  model_scores_ = Parameter("model.scores", Tensor({1, m}));
}

Parameter& AtaModel::source_matrix(std::size_t i, std::size_t l) {
  GnnModel& s = sources_.at(i);
  return l < s.num_layers() ? s.layer(l) : s.classifier();
}

const Parameter& AtaModel::source_matrix(std::size_t i, std::size_t l) const {
  const GnnModel& s = sources_.at(i);
  return l < s.num_layers() ? s.layer(l) : s.classifier();
}

std::vector<Parameter*> AtaModel::trainable_parameters() {
  std::vector<Parameter*> out;
  switch (options_.mode) {
    case AtaMode::node_centric:
      for (AtaLayer& s : stages_) {
        out.push_back(&s.attention);
        if (!options_.drop_global) out.push_back(&s.global);
      }
      break;
    case AtaMode::layer_centric:
      for (AtaLayer& s : stages_) out.push_back(&s.attention);
      break;
    case AtaMode::model_centric:
      out.push_back(&model_scores_);
      break;
  }
  if (options_.trainable_sources)
    for (GnnModel& s : sources_)
      for (Parameter* p : s.parameters()) out.push_back(p);
  return out;
}

Tensor local_context(const Tensor& h_prev, const SparseMatrix& neighbor_mean) {
  return neighbor_mean.multiply(h_prev);
}

std::vector<double> attention_scores(std::span<const double> c, std::span<const Tensor* const> sources,
                                     std::span<const double> a) {
  std::vector<double> raw(sources.size(), 0.0);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Tensor& w = *sources[i];
    if (w.rows() != c.size() || w.cols() != a.size()) throw ShapeError("attention_scores: dimension mismatch");
    for (std::size_t j = 0; j < w.rows(); ++j) {
      double wa = 0.0;
      for (std::size_t k = 0; k < w.cols(); ++k) wa += w(j, k) * a[k];
      raw[i] += c[j] * wa;
    }
  }
  return raw;
}

Tensor aggregate_weight(std::span<const double> c, std::span<const double> alphas,
                        std::span<const Tensor* const> sources, const Tensor& global, double lambda) {
  if (alphas.size() != sources.size()) throw ShapeError("aggregate_weight: one weight per source required");
  Tensor out = global;
  for (double& v : out.data()) v *= lambda;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Tensor& w = *sources[i];
    if (w.shape() != global.shape() || w.rows() != c.size()) throw ShapeError("aggregate_weight: dimension mismatch");
    for (std::size_t j = 0; j < w.rows(); ++j)
      for (std::size_t k = 0; k < w.cols(); ++k) out(j, k) += alphas[i] * c[j] * w(j, k);
  }
  return out;
}

namespace {

Var normalize(Var raw, Normalizer n) { return n == Normalizer::sparsemax ? row_sparsemax(raw) : row_softmax(raw); }

Var pooled_context(const GraphInput& input, Var h, ContextPooling pooling) {
  switch (pooling) {
    case ContextPooling::mean: return spmm(input.neighbor_mean, h);
    case ContextPooling::sum: return spmm(input.neighbor_sum, h);
    case ContextPooling::max: return neighbor_extreme(h, input.adjacency, true);
    case ContextPooling::min: return neighbor_extreme(h, input.adjacency, false);
  }
  return h;
}

// Context laid out like the augmented layer input: [c | 1] or [c | c | 1].
Var augmented_context(Backbone backbone, Var c) {
  if (backbone == Backbone::gcn) return append_ones_column(c);
  const Var parts[] = {c, c};
  return append_ones_column(concat_cols(parts));
}

std::vector<Var> bind_sources(Tape& tape, AtaModel& model, std::size_t stage) {
  std::vector<Var> w;
  for (std::size_t i = 0; i < model.num_sources(); ++i) {
    Parameter& p = model.source_matrix(i, stage);
    w.push_back(model.options().trainable_sources ? tape.parameter(p) : tape.constant(p.value));
  }
  return w;
}

// One stage of node-centric or layer-centric aggregation on the augmented
// input x with augmented context c (unused for layer-centric).
Var aggregate_stage(Tape& tape, AtaModel& model, std::size_t stage, Var x, Var c, std::vector<Tensor>& attention) {
  const AtaOptions& opt = model.options();
  const std::vector<Var> w = bind_sources(tape, model, stage);
  AtaLayer& layer = model.stage(stage);
  Var a = tape.parameter(layer.attention);
  std::vector<Var> projected;
  for (const Var& wi : w) projected.push_back(matmul(wi, a));
  Var u = concat_cols(projected);  // width × m: column i is W_i a

  if (opt.mode == AtaMode::layer_centric) {
    Var ones = tape.constant(Tensor({1, x.value().cols()}, 1.0));
    Var alpha = normalize(matmul(ones, u), opt.normalizer);
    attention.push_back(alpha.value());
    Var shared = weighted_sum(reshape(alpha, {w.size()}), w);
    return matmul(x, shared);
  }

  if (opt.force_unit_context) c = tape.constant(Tensor(x.value().shape(), 1.0));
  Var alpha = normalize(matmul(c, u), opt.normalizer);
  attention.push_back(alpha.value());
  Var z = opt.scaling == ContextScaling::diag ? hadamard(x, c) : x;
  std::vector<Var> terms;
  for (const Var& wi : w) terms.push_back(matmul(z, wi));
  Var out = row_weighted_sum(alpha, terms);
  if (!opt.drop_global) out = add(out, scale(matmul(x, tape.parameter(layer.global)), opt.lambda));
  return out;
}

AtaTapedForward model_centric_forward(Tape& tape, AtaModel& model, const GraphInput& input) {
  const AtaOptions& opt = model.options();
  AtaTapedForward result;
  Var alpha = normalize(tape.parameter(model.model_scores()), opt.normalizer);
  result.attention.push_back(alpha.value());
  std::vector<Var> reps, probs;
  for (std::size_t i = 0; i < model.num_sources(); ++i) {
    if (opt.trainable_sources) {
      const TapedForward f = gnn_forward(tape, model.source(i), input);
      reps.push_back(input.task == TaskKind::node ? f.representations
                                                  : segment_mean_max(f.representations, input.offsets));
      probs.push_back(row_softmax(f.logits));
    } else {
      const ForwardOutput f = gnn_forward(model.source(i), input);
      Tape scratch;
      const Tensor rep = input.task == TaskKind::node
                             ? f.representations
                             : segment_mean_max(scratch.constant(f.representations), input.offsets).value();
      reps.push_back(tape.constant(rep));
      probs.push_back(row_softmax(tape.constant(f.logits)));
    }
  }
  Var weights = reshape(alpha, {model.num_sources()});
  result.representations = weighted_sum(weights, reps);
  result.probabilities = weighted_sum(weights, probs);
  return result;
}

}  // namespace

AtaTapedForward ata_forward(Tape& tape, AtaModel& model, const GraphInput& input) {
  const GnnModel& ref = model.reference();
  if (input.feature_dim() != ref.dims().front()) {
    throw ShapeError("ata: input has " + std::to_string(input.feature_dim()) + " features, sources expect " +
                     std::to_string(ref.dims().front()));
  }
  if (input.task != ref.task()) throw UsageError("ata: source task does not match input task");
  if (model.options().mode == AtaMode::model_centric) return model_centric_forward(tape, model, input);

  const AtaOptions& opt = model.options();
  AtaTapedForward result;
  const std::size_t layers = ref.num_layers();
  Var h = tape.constant(input.features);
  for (std::size_t l = 0; l < layers; ++l) {
    Var x = propagate(ref.backbone(), input, h);
    Var c = augmented_context(ref.backbone(), pooled_context(input, h, opt.pooling));
    Var out = aggregate_stage(tape, model, l, x, c, result.attention);
    h = l + 1 < layers ? relu(out) : out;
  }
  Var x, c;
  if (input.task == TaskKind::node) {
    result.representations = h;
    x = append_ones_column(h);
    c = append_ones_column(pooled_context(input, h, opt.pooling));
  } else {
    result.representations = segment_mean_max(h, input.offsets);
    x = append_ones_column(result.representations);
    c = x;
  }
  result.probabilities = row_softmax(aggregate_stage(tape, model, layers, x, c, result.attention));
  return result;
}

AtaOutput ata_forward(const AtaModel& model, const GraphInput& input) {
  AtaModel copy = model;
  Tape tape;
  AtaTapedForward out = ata_forward(tape, copy, input);
  return {out.representations.value(), out.probabilities.value(), std::move(out.attention)};
}

double support_mean(const std::vector<Tensor>& attention) {
  double total = 0.0;
  std::size_t rows = 0;
  for (const Tensor& a : attention)
    for (std::size_t r = 0; r < a.rows(); ++r) {
      total += static_cast<double>(support_size(a.row(r)));
      ++rows;
    }
  return rows ? total / static_cast<double>(rows) : 0.0;
}

Tensor ensemble_predict(std::span<const GnnModel> sources, const GraphInput& input) {
  validate_ensemble(sources);
  Tensor mean;
  for (const GnnModel& s : sources) {
    Tape tape;
    const Tensor p = row_softmax(tape.constant(gnn_forward(s, input).logits)).value();
    if (mean.empty()) mean = Tensor(p.shape());
    add_inplace(mean, p, 1.0 / static_cast<double>(sources.size()));
  }
  return mean;
}

void check_distribution_rows(const Tensor& p, double tol, const char* what) {
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) {
      if (!(v >= 0.0)) throw NumericError(std::string(what) + ": negative or non-finite probability in row " +
                                          std::to_string(r));
      s += v;
    }
    if (std::abs(s - 1.0) > tol) {
      throw NumericError(std::string(what) + ": row " + std::to_string(r) + " sums to " + format_double(s));
    }
  }
}

MemoryBanks::MemoryBanks(Tensor representations, Tensor predictions, double gamma)
    : r_(std::move(representations)), p_(std::move(predictions)), gamma_(gamma) {
  if (!(gamma_ > 0.0 && gamma_ <= 1.0)) throw ConfigError("memory bank momentum must lie in (0, 1]");
  if (r_.rank() != 2 || p_.rank() != 2 || r_.rows() != p_.rows()) throw ShapeError("memory banks: row mismatch");
  check_distribution_rows(p_, 1e-9, "memory bank");
}

void MemoryBanks::update(const Tensor& h, const Tensor& p) {
  check_same_shape(r_, h, "memory bank representations");
  check_same_shape(p_, p, "memory bank predictions");
  check_distribution_rows(p, 1e-9, "memory bank update");
  const double keep = 1.0 - gamma_;
  for (std::size_t i = 0; i < r_.size(); ++i) r_[i] = keep * r_[i] + gamma_ * h[i];
  for (std::size_t i = 0; i < p_.size(); ++i) p_[i] = keep * p_[i] + gamma_ * p[i];
}

PseudoLabels knn_pseudo_labels(const MemoryBanks& banks, const Tensor& h, std::size_t r) {
  const Tensor& bank = banks.representations();
  const Tensor& pred = banks.predictions();
  const std::size_t n = h.rows();
  if (h.cols() != bank.cols() || bank.rows() != n) throw ShapeError("knn: representations do not match the bank");
  if (r < 1 || r >= n) {
    throw UsageError("knn: r = " + std::to_string(r) + " outside [1, n) for n = " + std::to_string(n));
  }
  const std::size_t k = pred.cols();

  auto row_norms = [](const Tensor& t) {
    std::vector<double> norms(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) {
      double s = 0.0;
      for (double v : t.row(i)) s += v * v;
      norms[i] = std::sqrt(s);
    }
    return norms;
  };
  const std::vector<double> query_norm = row_norms(h);
  const std::vector<double> bank_norm = row_norms(bank);
  const Tensor bank_t = transpose(bank);

  PseudoLabels out;
  out.one_hot = Tensor({n, k});
  out.labels.resize(n);
  out.neighbors.resize(n);

  // Similarities are formed in blocks of query rows against the transposed
  // bank; each dot product accumulates over features in index order.
  constexpr std::size_t kBlock = 64;
  std::vector<double> top_sim(r);
  std::vector<std::size_t> top_idx(r);
  std::vector<double> mean(k);
  for (std::size_t start = 0; start < n; start += kBlock) {
    const std::size_t rows = std::min(kBlock, n - start);
    Tensor block({rows, h.cols()});
    std::copy(h.data().begin() + start * h.cols(), h.data().begin() + (start + rows) * h.cols(), block.data().begin());
    Tensor sims = matmul(block, bank_t);
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t i = start + b;
      auto s = sims.row(b);
      for (std::size_t j = 0; j < n; ++j) s[j] /= std::max(query_norm[i] * bank_norm[j], 1e-12);

      // Sorted top-r buffer (similarity desc, index asc). Candidates arrive in
      // index order, so an equal similarity never displaces an earlier entry.
      std::size_t filled = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double v = s[j];
        if (filled == r && !(v > top_sim[r - 1])) continue;
        std::size_t pos = filled < r ? filled++ : r - 1;
        while (pos > 0 && v > top_sim[pos - 1]) {
          top_sim[pos] = top_sim[pos - 1];
          top_idx[pos] = top_idx[pos - 1];
          --pos;
        }
        top_sim[pos] = v;
        top_idx[pos] = j;
      }
      out.neighbors[i].assign(top_idx.begin(), top_idx.begin() + r);

      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t j : out.neighbors[i]) {
        const auto p = pred.row(j);
        for (std::size_t c = 0; c < k; ++c) mean[c] += p[c];
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (mean[c] > mean[best]) best = c;
      out.labels[i] = static_cast<int>(best);
      out.one_hot(i, best) = 1.0;
    }
  }
  return out;
}

namespace {

constexpr double kLogFloor = 1e-12;

double clamped_log(double p) { return std::log(std::max(p, kLogFloor)); }

// d/dp of −p·log(max(p, floor)).
double neg_plogp_derivative(double p) { return p > kLogFloor ? -(std::log(p) + 1.0) : -std::log(kLogFloor); }

}  // namespace

Var loss_cls(Var p, const Tensor& y_hat) {
  const Tensor& pv = p.value();
  check_same_shape(pv, y_hat, "loss_cls");
  const double n = static_cast<double>(pv.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i)
    if (y_hat[i] != 0.0) total -= y_hat[i] * clamped_log(pv[i]);
  return p.tape().record(Tensor::vector({total / n}), {p}, [p, y_hat, n](Tape& t, const Tensor& g) {
    Tensor* gp = t.grad_buffer(p);
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < pv.size(); ++i)
      if (y_hat[i] != 0.0 && pv[i] > kLogFloor) (*gp)[i] -= g[0] * y_hat[i] / (n * pv[i]);
  });
}

Var loss_reg(Var p) {
  const Tensor& pv = p.value();
  if (pv.rank() != 2 || pv.rows() == 0) throw ShapeError("loss_reg expects a nonempty matrix");
  const std::size_t rows = pv.rows(), k = pv.cols();
  const double n = static_cast<double>(rows);
  std::vector<double> mean(k, 0.0);
  double individual = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = pv.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      individual -= row[c] * clamped_log(row[c]);
      mean[c] += row[c] / n;
    }
  }
  double global = 0.0;
  for (double m : mean) global -= m * clamped_log(m);
  return p.tape().record(Tensor::vector({individual / n - global}), {p}, [p, mean, n](Tape& t, const Tensor& g) {
    Tensor* gp = t.grad_buffer(p);
    const Tensor& pv = p.value();
    const std::size_t k = pv.cols();
    for (std::size_t i = 0; i < pv.rows(); ++i) {
      const auto row = pv.row(i);
      auto out = gp->row(i);
      for (std::size_t c = 0; c < k; ++c) {
        out[c] += g[0] * (neg_plogp_derivative(row[c]) - neg_plogp_derivative(mean[c])) / n;
      }
    }
  });
}

void AdaptationConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("adaptation: lambda must lie in [0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("adaptation: gamma must lie in (0, 1]");
  if (r < 1) throw ConfigError("adaptation: r must be >= 1");
  if (epochs < 0) throw ConfigError("adaptation: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("adaptation: learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("adaptation: weight decay must be nonnegative");
}

AtaOptions AdaptationConfig::ata_options() const {
  AtaOptions o;
  o.mode = mode;
  o.normalizer = normalizer;
  o.pooling = pooling;
  o.scaling = scaling;
  o.lambda = lambda;
  o.trainable_sources = unfreeze_sources;
  return o;
}

AdaptResult adapt(std::vector<GnnModel> sources, const GraphInput& target, const AdaptationConfig& config,
                  std::span<const int> eval_labels) {
  config.validate();
  AdaptResult result;
  result.model = AtaModel(std::move(sources), config.ata_options());
  AtaModel& model = result.model;
  const std::size_t n = target.num_outputs();
  if (n < 2) throw UsageError("adapt: the target needs at least two samples");
  if (!eval_labels.empty() && eval_labels.size() != n) throw ShapeError("adapt: one evaluation label per sample");
  result.effective_r = std::min(config.r, n - 1);

  // Non-finite outputs would otherwise surface as a bank check failure.
  auto require_finite = [](const Tensor& h, const Tensor& p, int epoch) {
    auto finite = [](const Tensor& t) {
      return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
    };
    if (!finite(h) || !finite(p)) {
      throw TrainingError("adaptation diverged at epoch " + std::to_string(epoch) + " (non-finite forward output)",
                          epoch);
    }
  };
  auto diverged = [](const NumericError& e, int epoch) {
    return TrainingError("adaptation diverged at epoch " + std::to_string(epoch) + ": " + e.what(), epoch);
  };
  AtaOutput initial;
  try {
    initial = ata_forward(model, target);
  } catch (const NumericError& e) {
    throw diverged(e, 0);
  }
  require_finite(initial.representations, initial.probabilities, 0);
  MemoryBanks banks(initial.representations, initial.probabilities, config.gamma);
  AdamState adam({.learning_rate = config.learning_rate, .weight_decay = config.weight_decay});
  const std::vector<Parameter*> params = model.trainable_parameters();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Tape tape;
    AtaTapedForward out;
    try {
      out = ata_forward(tape, model, target);
    } catch (const NumericError& e) {
      throw diverged(e, epoch);
    }
    require_finite(out.representations.value(), out.probabilities.value(), epoch);
    banks.update(out.representations.value(), out.probabilities.value());
    const PseudoLabels pseudo = knn_pseudo_labels(banks, out.representations.value(), result.effective_r);
    const Var cls = loss_cls(out.probabilities, pseudo.one_hot);
    const Var reg = loss_reg(out.probabilities);
    const Var total = config.use_reg ? add(cls, reg) : cls;

    EpochMetrics m;
    m.epoch = epoch;
    m.loss_cls = cls.value()[0];
    m.loss_reg = reg.value()[0];
    m.loss_total = total.value()[0];
    if (!std::isfinite(m.loss_total)) {
      throw TrainingError("adaptation diverged at epoch " + std::to_string(epoch), epoch);
    }
    if (!eval_labels.empty()) m.accuracy = evaluate_accuracy(out.probabilities.value(), eval_labels);
    m.support_mean = support_mean(out.attention);
    result.history.push_back(m);

    tape.backward(total);
    adam.step(params);
  }
  return result;
}

std::string history_csv(const std::vector<EpochMetrics>& history) {
  std::ostringstream out;
  out << "epoch,loss_cls,loss_reg,loss_total,accuracy,support_mean\n";
  for (const EpochMetrics& m : history) {
    out << m.epoch << ',' << format_double(m.loss_cls) << ',' << format_double(m.loss_reg) << ','
        << format_double(m.loss_total) << ',' << (m.accuracy ? format_double(*m.accuracy) : "") << ','
        << format_double(m.support_mean) << '\n';
  }
  return out.str();
}

}  // namespace graphata
