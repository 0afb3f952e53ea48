#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "graphata/sparse.hpp"
#include "graphata/tensor.hpp"

namespace graphata {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording. Nodes are appended in evaluation order, so reverse
// recording order is a valid topological order for the backward sweep.
//
// A tape is meant to be built fresh for every forward pass and used from a
// single thread. Sparse operands passed to ops are held by reference and must
// outlive the backward sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to a parameter: backward() adds its gradient into p.grad.
  Var parameter(Parameter& p);
  // Leaf that never receives gradient.
  Var constant(Tensor value);

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);
  // Attaches a rule after recording, for rules that read their own output.
  // No-op when v needs no gradient.
  void set_backward(Var v, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradient buffer of v, materialized as zeros on first access. Backward
  // rules accumulate into it. Returns nullptr when v needs no gradient.
  Tensor* grad_buffer(Var v);
  void accumulate(Var v, const Tensor& g, double scale = 1.0);

  // Seeds d(root)/d(root) = 1 (root must hold a single value) and sweeps
  // backward. Every bound parameter ends with a materialized gradient.
  void backward(Var root);
  // Seeds with an arbitrary upstream gradient of root's shape.
  void backward(Var root, const Tensor& seed);

  std::size_t size() const { return nodes_.size(); }
  // Number of backward rules invoked by the last sweep.
  std::size_t backward_calls() const { return backward_calls_; }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    Backward backward;
    Parameter* sink = nullptr;
    bool requires_grad = false;
  };
  Var push(Node node);

  std::deque<Node> nodes_;
  std::size_t backward_calls_ = 0;
};

// Differentiable primitives.
Var matmul(Var a, Var b);
Var spmm(const SparseMatrix& s, Var d);
Var relu(Var x);
Var row_softmax(Var x);
Var add(Var a, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
Var sum(Var x);
Var reshape(Var x, Shape shape);
// [x | 1]: appends a constant-one column.
Var append_ones_column(Var x);
Var concat_cols(std::span<const Var> parts);
// Σ_i diag(weights[:, i]) · terms[i]. weights is n×m, each term n×d.
Var row_weighted_sum(Var weights, std::span<const Var> terms);
// Σ_i weights[i] · terms[i] with a weight vector of m entries.
Var weighted_sum(Var weights, std::span<const Var> terms);
// Per segment [start, end) of rows: [column mean | column max]. Produces
// one row of width 2d per segment. Max ties route gradient to the first row.
Var segment_mean_max(Var h, std::span<const std::size_t> offsets);
// Per node column-wise max (or min) over neighbors given by the sparsity
// pattern of adjacency. Rows without neighbors select the node itself.
Var neighbor_extreme(Var h, const SparseMatrix& adjacency, bool take_max);
// Mean cross-entropy of softmax(logits) over the selected rows.
Var softmax_cross_entropy(Var logits, std::span<const int> labels, std::span<const std::size_t> rows);

// Softmax of a single row, max-subtracted.
void softmax_row(std::span<const double> in, std::span<double> out);

}  // namespace graphata
