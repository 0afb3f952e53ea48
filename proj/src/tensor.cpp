#include "graphata/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "graphata/errors.hpp"

namespace graphata {
namespace memory {
namespace {
thread_local AllocationStats tls_stats;
}

AllocationStats stats() { return tls_stats; }
void reset_peak() { tls_stats.peak_bytes = tls_stats.current_bytes; }

void record_allocation(std::size_t bytes) {
  tls_stats.current_bytes += bytes;
  tls_stats.peak_bytes = std::max(tls_stats.peak_bytes, tls_stats.current_bytes);
}

void record_deallocation(std::size_t bytes) {
  // Buffers can migrate between threads when results are handed back; clamp
  // rather than wrap.
  tls_stats.current_bytes -= std::min(bytes, tls_stats.current_bytes);
}

}  // namespace memory

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::span<const double> values) : shape_(std::move(shape)) {
  if (element_count(shape_) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  values_.assign(values.begin(), values.end());
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Tensor t({r, c});
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    for (double v : row) t.values_[i++] = v;
  }
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::span<const double>(values.begin(), values.size()));
}

Tensor Tensor::vector(std::span<const double> values) { return Tensor({values.size()}, values); }

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  if (shape_.size() > 2) throw ShapeError("cols() on tensor of rank " + std::to_string(shape_.size()));
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t;
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  t.shape_ = std::move(shape);
  t.values_ = values_;
  return t;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

namespace {

// C(i,j) = Σ_p a(i,p)·b(p,j) with a(i,p) = A[i·ars + p·acs] and
// b(p,j) = B[p·brs + j·bcs]. Every sum starts from zero and runs over p in
// increasing order, so results agree bit for bit with a plain triple loop.
// A is packed into 4-row panels and B into 8-column panels; a 4×8 block of C
// stays in registers over the whole depth.
void gemm(std::size_t m, std::size_t k, std::size_t n, const double* A, std::size_t ars, std::size_t acs,
          const double* B, std::size_t brs, std::size_t bcs, double* C) {
  constexpr std::size_t R = 4, S = 8;
  if (m == 0 || n == 0) return;
  const std::size_t row_blocks = (m + R - 1) / R;
  std::vector<double> apack(row_blocks * k * R, 0.0);
  for (std::size_t ib = 0; ib < row_blocks; ++ib)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t i = ib * R + r;
        if (i < m) apack[(ib * k + p) * R + r] = A[i * ars + p * acs];
      }
  std::vector<double> bpack(k * S);
  for (std::size_t j0 = 0; j0 < n; j0 += S) {
    const std::size_t jw = std::min(S, n - j0);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t c = 0; c < S; ++c) bpack[p * S + c] = c < jw ? B[p * brs + (j0 + c) * bcs] : 0.0;
    for (std::size_t ib = 0; ib < row_blocks; ++ib) {
      const double* ap = apack.data() + ib * k * R;
      double acc[R][S] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* av = ap + p * R;
        const double* bv = bpack.data() + p * S;
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < S; ++c) acc[r][c] += av[r] * bv[c];
      }
      const std::size_t iw = std::min(R, m - ib * R);
      for (std::size_t r = 0; r < iw; ++r)
        for (std::size_t c = 0; c < jw; ++c) C[(ib * R + r) * n + j0 + c] = acc[r][c];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  gemm(m, k, n, a.data().data(), k, 1, b.data().data(), n, 1, c.data().data());
  return c;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw ShapeError("matmul_at_b: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  Tensor c({m, n});
  gemm(m, k, n, a.data().data(), 1, m, b.data().data(), n, 1, c.data().data());
  return c;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_a_bt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c({m, n});
  gemm(m, k, n, a.data().data(), k, 1, b.data().data(), 1, k, c.data().data());
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void add_inplace(Tensor& dst, const Tensor& src, double scale) {
  if (dst.size() != src.size()) {
    throw ShapeError("add_inplace: " + shape_string(dst.shape()) + " vs " + shape_string(src.shape()));
  }
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace graphata
