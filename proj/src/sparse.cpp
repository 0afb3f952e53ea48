#include "graphata/sparse.hpp"

#include <algorithm>
#include <string>

#include "graphata/errors.hpp"

namespace graphata {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_pointers,
                           std::vector<std::size_t> column_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_pointers_(std::move(row_pointers)),
      column_indices_(std::move(column_indices)),
      values_(std::move(values)) {
  if (row_pointers_.size() != rows_ + 1 || row_pointers_.front() != 0 ||
      row_pointers_.back() != values_.size() || column_indices_.size() != values_.size()) {
    throw ShapeError("sparse matrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_pointers_[r] > row_pointers_[r + 1]) throw ShapeError("sparse matrix: row pointers decrease");
    for (std::size_t k = row_pointers_[r]; k < row_pointers_[r + 1]; ++k) {
      if (column_indices_[k] >= cols_) {
        throw ShapeError("sparse matrix: column " + std::to_string(column_indices_[k]) + " out of range");
      }
      if (k > row_pointers_[r] && column_indices_[k] <= column_indices_[k - 1]) {
        throw ShapeError("sparse matrix: columns not strictly increasing in row " + std::to_string(r));
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> ptr(rows + 1, 0);
  std::vector<std::size_t> idx;
  std::vector<double> val;
  idx.reserve(triplets.size());
  val.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) throw ShapeError("sparse matrix: triplet out of range");
    if (!idx.empty() && i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      val.back() += t.value;
      continue;
    }
    idx.push_back(t.col);
    val.push_back(t.value);
    ++ptr[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) ptr[r + 1] += ptr[r];
  return SparseMatrix(rows, cols, std::move(ptr), std::move(idx), std::move(val));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> ptr(n + 1), idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    ptr[i + 1] = i + 1;
    idx[i] = i;
  }
  return SparseMatrix(n, n, std::move(ptr), std::move(idx), std::vector<double>(n, 1.0));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_columns(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_pointers_[r] + static_cast<std::size_t>(it - cols.begin())];
}

Tensor SparseMatrix::to_dense() const {
  Tensor d({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_pointers_[r]; k < row_pointers_[r + 1]; ++k) d(r, column_indices_[k]) = values_[k];
  return d;
}

Tensor SparseMatrix::multiply(const Tensor& dense) const {
  if (dense.rank() != 2 || dense.rows() != cols_) {
    throw ShapeError("spmm: sparse " + std::to_string(rows_) + "x" + std::to_string(cols_) + " times " +
                     shape_string(dense.shape()));
  }
  const std::size_t n = dense.cols();
  Tensor out({rows_, n});
  for (std::size_t r = 0; r < rows_; ++r) {
    double* o = out.row(r).data();
    for (std::size_t k = row_pointers_[r]; k < row_pointers_[r + 1]; ++k) {
      const double v = values_[k];
      const double* src = dense.row(column_indices_[k]).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += v * src[j];
    }
  }
  return out;
}

Tensor SparseMatrix::multiply_transposed(const Tensor& dense) const {
  if (dense.rank() != 2 || dense.rows() != rows_) {
    throw ShapeError("spmm transposed: shape mismatch with " + shape_string(dense.shape()));
  }
  const std::size_t n = dense.cols();
  Tensor out({cols_, n});
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* src = dense.row(r).data();
    for (std::size_t k = row_pointers_[r]; k < row_pointers_[r + 1]; ++k) {
      const double v = values_[k];
      double* o = out.row(column_indices_[k]).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += v * src[j];
    }
  }
  return out;
}

}  // namespace graphata
