#include "graphata/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "graphata/errors.hpp"

namespace graphata {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.sink = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw UsageError("tape: input recorded on a different tape");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::set_backward(Var v, Backward backward) {
  Node& n = nodes_[v.id()];
  if (n.requires_grad) n.backward = std::move(backward);
}

Tensor* Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (!n.grad) n.grad = Tensor(n.value.shape());
  return &*n.grad;
}

void Tape::accumulate(Var v, const Tensor& g, double scale) {
  if (Tensor* buf = grad_buffer(v)) add_inplace(*buf, g, scale);
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) {
    throw UsageError("backward: root holds " + std::to_string(value(root).size()) + " values, expected a scalar");
  }
  backward(root, Tensor(value(root).shape(), 1.0));
}

void Tape::backward(Var root, const Tensor& seed) {
  check_same_shape(value(root), seed, "backward seed");
  backward_calls_ = 0;
  accumulate(root, seed);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad && n.backward) {
      n.backward(*this, *n.grad);
      ++backward_calls_;
    }
  }
  for (Node& n : nodes_) {
    if (!n.sink) continue;
    Parameter& p = *n.sink;
    if (!p.grad) p.grad = Tensor(p.value.shape());
    if (n.grad) add_inplace(*p.grad, *n.grad);
  }
}

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = a.tape();
  return tape.record(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) add_inplace(*ga, matmul_a_bt(g, b.value()));
    if (Tensor* gb = t.grad_buffer(b)) add_inplace(*gb, matmul_at_b(a.value(), g));
  });
}

Var spmm(const SparseMatrix& s, Var d) {
  return d.tape().record(s.multiply(d.value()), {d}, [&s, d](Tape& t, const Tensor& g) {
    t.accumulate(d, s.multiply_transposed(g));
  });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  // Written so that NaN passes through instead of being clamped to 0.
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] < 0.0 ? 0.0 : xv[i];
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > 0.0) (*gx)[i] += g[i];
  });
}

void softmax_row(std::span<const double> in, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : in) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    out[k] = std::exp(in[k] - mx);
    z += out[k];
  }
  for (double& v : out) v /= z;
}

Var row_softmax(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "row_softmax");
  if (xv.cols() == 0) throw ShapeError("row_softmax: zero columns");
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) softmax_row(xv.row(r), out.row(r));
  Var y = x.tape().record(std::move(out), {x}, {});
  x.tape().set_backward(y, [x, y](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    const Tensor& p = y.value();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      auto pr = p.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t k = 0; k < pr.size(); ++k) dot += pr[k] * gr[k];
      auto out = gx->row(r);
      for (std::size_t k = 0; k < pr.size(); ++k) out[k] += pr[k] * (gr[k] - dot);
    }
  });
  return y;
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_inplace(out, b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= c;
  return a.tape().record(std::move(out), {a}, [a, c](Tape& t, const Tensor& g) { t.accumulate(a, g, c); });
}

Var hadamard(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "hadamard");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
    if (Tensor* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor({1}, std::span<const double>(&s, 1)), {x}, [x](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    for (double& v : gx->data()) v += g[0];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var append_ones_column(Var x) {
  const Tensor& xv = x.value();
  require_rank2(xv, "append_ones_column");
  const std::size_t n = xv.rows(), d = xv.cols();
  Tensor out({n, d + 1});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(xv.row(r).begin(), xv.row(r).end(), out.row(r).begin());
    out(r, d) = 1.0;
  }
  return x.tape().record(std::move(out), {x}, [x, d](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    for (std::size_t r = 0; r < gx->rows(); ++r)
      for (std::size_t c = 0; c < d; ++c) (*gx)(r, c) += g(r, c);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].value().rows();
  std::size_t width = 0;
  for (const Var& p : parts) {
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != n) throw ShapeError("concat_cols: row counts differ");
    width += p.value().cols();
  }
  Tensor out({n, width});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < n; ++r)
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t w = p.value().cols();
      if (Tensor* gp = t.grad_buffer(p)) {
        for (std::size_t r = 0; r < gp->rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) (*gp)(r, c) += g(r, offset + c);
      }
      offset += w;
    }
  });
}

Var row_weighted_sum(Var weights, std::span<const Var> terms) {
  const Tensor& w = weights.value();
  require_rank2(w, "row_weighted_sum");
  if (w.cols() != terms.size()) throw ShapeError("row_weighted_sum: weight columns != number of terms");
  if (terms.empty()) throw ShapeError("row_weighted_sum: no terms");
  const Shape shape = terms[0].value().shape();
  for (const Var& term : terms) {
    check_same_shape(terms[0].value(), term.value(), "row_weighted_sum");
  }
  const std::size_t n = w.rows();
  if (terms[0].value().rows() != n) throw ShapeError("row_weighted_sum: row counts differ");
  Tensor out(shape);
  const std::size_t d = out.cols();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Tensor& tv = terms[i].value();
    for (std::size_t r = 0; r < n; ++r) {
      const double wi = w(r, i);
      if (wi == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) out(r, c) += wi * tv(r, c);
    }
  }
  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), terms.begin(), terms.end());
  return weights.tape().record(std::move(out), inputs, [inputs](Tape& t, const Tensor& g) {
    const Var weights = inputs[0];
    const Tensor& w = weights.value();
    Tensor* gw = t.grad_buffer(weights);
    const std::size_t n = g.rows(), d = g.cols();
    for (std::size_t i = 1; i < inputs.size(); ++i) {
      const Tensor& tv = inputs[i].value();
      Tensor* gt = t.grad_buffer(inputs[i]);
      for (std::size_t r = 0; r < n; ++r) {
        const double wi = w(r, i - 1);
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          dot += g(r, c) * tv(r, c);
          if (gt) (*gt)(r, c) += wi * g(r, c);
        }
        if (gw) (*gw)(r, i - 1) += dot;
      }
    }
  });
}

Var weighted_sum(Var weights, std::span<const Var> terms) {
  const Tensor& w = weights.value();
  if (w.size() != terms.size() || terms.empty()) throw ShapeError("weighted_sum: weight count != number of terms");
  Tensor out(terms[0].value().shape());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    check_same_shape(terms[0].value(), terms[i].value(), "weighted_sum");
    add_inplace(out, terms[i].value(), w[i]);
  }
  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), terms.begin(), terms.end());
  return weights.tape().record(std::move(out), inputs, [inputs](Tape& t, const Tensor& g) {
    const Tensor& w = inputs[0].value();
    Tensor* gw = t.grad_buffer(inputs[0]);
    for (std::size_t i = 1; i < inputs.size(); ++i) {
      const Tensor& tv = inputs[i].value();
      if (gw) {
        double dot = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * tv[k];
        (*gw)[i - 1] += dot;
      }
      t.accumulate(inputs[i], g, w[i - 1]);
    }
  });
}

Var segment_mean_max(Var h, std::span<const std::size_t> offsets) {
  const Tensor& hv = h.value();
  require_rank2(hv, "segment_mean_max");
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != hv.rows()) {
    throw ShapeError("segment_mean_max: offsets must span all rows");
  }
  const std::size_t segments = offsets.size() - 1, d = hv.cols();
  Tensor out({segments, 2 * d});
  std::vector<std::size_t> argmax(segments * d);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = offsets[s], end = offsets[s + 1];
    if (end <= begin) throw UsageError("graph readout: empty graph in segment " + std::to_string(s));
    for (std::size_t c = 0; c < d; ++c) {
      double total = 0.0;
      std::size_t best = begin;
      for (std::size_t r = begin; r < end; ++r) {
        total += hv(r, c);
        if (hv(r, c) > hv(best, c)) best = r;
      }
      out(s, c) = total / static_cast<double>(end - begin);
      out(s, d + c) = hv(best, c);
      argmax[s * d + c] = best;
    }
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return h.tape().record(std::move(out), {h}, [h, offs, argmax, d](Tape& t, const Tensor& g) {
    Tensor* gh = t.grad_buffer(h);
    for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(offs[s + 1] - offs[s]);
      for (std::size_t r = offs[s]; r < offs[s + 1]; ++r)
        for (std::size_t c = 0; c < d; ++c) (*gh)(r, c) += g(s, c) * inv;
      for (std::size_t c = 0; c < d; ++c) (*gh)(argmax[s * d + c], c) += g(s, d + c);
    }
  });
}

Var neighbor_extreme(Var h, const SparseMatrix& adjacency, bool take_max) {
  const Tensor& hv = h.value();
  require_rank2(hv, "neighbor_extreme");
  if (adjacency.rows() != hv.rows() || adjacency.cols() != hv.rows()) {
    throw ShapeError("neighbor_extreme: adjacency does not match representation rows");
  }
  const std::size_t n = hv.rows(), d = hv.cols();
  Tensor out({n, d});
  std::vector<std::size_t> source(n * d);
  for (std::size_t v = 0; v < n; ++v) {
    auto nbrs = adjacency.row_columns(v);
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t best = nbrs.empty() ? v : nbrs[0];
      for (std::size_t u : nbrs) {
        const bool better = take_max ? hv(u, c) > hv(best, c) : hv(u, c) < hv(best, c);
        if (better) best = u;
      }
      out(v, c) = hv(best, c);
      source[v * d + c] = best;
    }
  }
  return h.tape().record(std::move(out), {h}, [h, source, d](Tape& t, const Tensor& g) {
    Tensor* gh = t.grad_buffer(h);
    for (std::size_t v = 0; v < g.rows(); ++v)
      for (std::size_t c = 0; c < d; ++c) (*gh)(source[v * d + c], c) += g(v, c);
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  const Tensor& z = logits.value();
  require_rank2(z, "softmax_cross_entropy");
  if (labels.size() != z.rows()) throw ShapeError("softmax_cross_entropy: label count != logit rows");
  if (rows.empty()) throw UsageError("softmax_cross_entropy: no rows selected");
  const std::size_t k = z.cols();
  Tensor probs({rows.size(), k});
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw UsageError("softmax_cross_entropy: label out of range");
    softmax_row(z.row(r), probs.row(i));
    loss -= std::log(std::max(probs(i, static_cast<std::size_t>(y)), 1e-300));
  }
  loss /= static_cast<double>(rows.size());
  std::vector<std::size_t> rs(rows.begin(), rows.end());
  std::vector<int> ys(labels.begin(), labels.end());
  return logits.tape().record(Tensor({1}, std::span<const double>(&loss, 1)), {logits},
                              [logits, rs, ys, probs](Tape& t, const Tensor& g) {
                                Tensor* gz = t.grad_buffer(logits);
                                const double scale = g[0] / static_cast<double>(rs.size());
                                for (std::size_t i = 0; i < rs.size(); ++i) {
                                  for (std::size_t c = 0; c < probs.cols(); ++c) {
                                    const double target = static_cast<int>(c) == ys[rs[i]] ? 1.0 : 0.0;
                                    (*gz)(rs[i], c) += scale * (probs(i, c) - target);
                                  }
                                }
                              });
}

}  // namespace graphata
