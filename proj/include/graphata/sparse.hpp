#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graphata/tensor.hpp"

namespace graphata {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed-sparse-row matrix. Column indices are strictly increasing within
// each row. Immutable after construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  // Validates the CSR invariants; throws ShapeError on violation.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_pointers,
               std::vector<std::size_t> column_indices, std::vector<double> values);
  // Builds from unordered triplets; duplicates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const std::size_t> row_pointers() const { return row_pointers_; }
  std::span<const std::size_t> column_indices() const { return column_indices_; }
  std::span<const double> values() const { return values_; }

  std::span<const std::size_t> row_columns(std::size_t r) const {
    return column_indices().subspan(row_pointers_[r], row_pointers_[r + 1] - row_pointers_[r]);
  }
  std::span<const double> row_values(std::size_t r) const {
    return values().subspan(row_pointers_[r], row_pointers_[r + 1] - row_pointers_[r]);
  }

  // Entry lookup by binary search; 0 for structural zeros.
  double at(std::size_t r, std::size_t c) const;
  Tensor to_dense() const;

  // S·D and Sᵀ·D.
  Tensor multiply(const Tensor& dense) const;
  Tensor multiply_transposed(const Tensor& dense) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_pointers_{0};
  std::vector<std::size_t> column_indices_;
  std::vector<double> values_;
};

}  // namespace graphata
