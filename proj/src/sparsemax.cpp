#include "graphata/sparsemax.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "graphata/errors.hpp"

namespace graphata {

void sparsemax_into(std::span<const double> z, std::span<double> out) {
  if (z.empty()) throw UsageError("sparsemax: empty input");
  for (double v : z)
    if (!std::isfinite(v)) throw NumericError("sparsemax: non-finite input");
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, tau_sum = sorted[0];
  std::size_t eta = 1;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    if (sorted[j] > (cumulative - 1.0) / static_cast<double>(j + 1)) {
      eta = j + 1;
      tau_sum = cumulative;
    }
  }
  const double tau = (tau_sum - 1.0) / static_cast<double>(eta);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i] - tau, 0.0);
}

std::vector<double> sparsemax(std::span<const double> z) {
  std::vector<double> out(z.size());
  sparsemax_into(z, out);
  return out;
}

namespace {

void jvp_from_output(std::span<const double> p, std::span<const double> upstream, std::span<double> out) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      total += upstream[i];
      ++count;
    }
  }
  const double mean = count ? total / static_cast<double>(count) : 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.0 ? upstream[i] - mean : 0.0;
}

}  // namespace

std::vector<double> sparsemax_jacobian_vp(std::span<const double> z, std::span<const double> upstream) {
  if (z.size() != upstream.size()) throw ShapeError("sparsemax_jacobian_vp: length mismatch");
  const std::vector<double> p = sparsemax(z);
  std::vector<double> out(z.size());
  jvp_from_output(p, upstream, out);
  return out;
}

std::size_t support_size(std::span<const double> p) {
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](double v) { return v > 0.0; }));
}

Var row_sparsemax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("row_sparsemax expects a matrix, got " + shape_string(xv.shape()));
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) sparsemax_into(xv.row(r), out.row(r));
  Var y = x.tape().record(std::move(out), {x}, {});
  x.tape().set_backward(y, [x, y](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    const Tensor& p = y.value();
    std::vector<double> row(p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      jvp_from_output(p.row(r), g.row(r), row);
      auto dst = gx->row(r);
      for (std::size_t k = 0; k < row.size(); ++k) dst[k] += row[k];
    }
  });
  return y;
}

}  // namespace graphata
