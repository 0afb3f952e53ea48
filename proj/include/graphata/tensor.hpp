#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace graphata {

// Byte counters for tensor storage. Counters are per thread so that runs
// confined to one thread report reproducible numbers.
namespace memory {

struct AllocationStats {
  std::size_t current_bytes = 0;
  std::size_t peak_bytes = 0;
};

AllocationStats stats();
// Sets the peak to the current level.
void reset_peak();
void record_allocation(std::size_t bytes);
void record_deallocation(std::size_t bytes);

template <typename T>
struct CountingAllocator {
  using value_type = T;

  CountingAllocator() = default;
  template <typename U>
  CountingAllocator(const CountingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    record_allocation(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    record_deallocation(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <typename U>
  bool operator==(const CountingAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace memory

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 1 and rank 2 are the only ranks the
// library produces; rows()/cols() treat a rank-1 tensor as a column.
class Tensor {
 public:
  using Buffer = std::vector<double, memory::CountingAllocator<double>>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> values);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::span<const double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }
  std::span<double> row(std::size_t r) { return data().subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const { return data().subspan(r * cols(), cols()); }

  // Same values under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  Buffer values_;
};

// A trainable tensor together with its lazily materialized gradient.
struct Parameter {
  std::string name;
  Tensor value;
  std::optional<Tensor> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}
  void zero_grad() { grad.reset(); }
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Plain (untaped) kernels shared by the forward and backward passes.
Tensor matmul(const Tensor& a, const Tensor& b);
// aᵀ·b without materializing the transpose.
Tensor matmul_at_b(const Tensor& a, const Tensor& b);
// a·bᵀ without materializing the transpose.
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
void add_inplace(Tensor& dst, const Tensor& src, double scale = 1.0);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace graphata
