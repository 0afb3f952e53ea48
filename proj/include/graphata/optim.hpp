#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "graphata/autodiff.hpp"
#include "graphata/tensor.hpp"

namespace graphata {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style) decay: w -= lr * weight_decay * w.
  double weight_decay = 0.0;
};

// Adam with bias correction. Moments are allocated on the first step and
// must keep matching the parameter shapes afterwards.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {}) : options_(options) {}

  // Applies one update to every parameter, then clears their gradients.
  // Throws UsageError if a parameter has no materialized gradient.
  void step(std::span<Parameter* const> params);

  const AdamOptions& options() const { return options_; }
  std::size_t step_count() const { return step_; }

 private:
  AdamOptions options_;
  std::size_t step_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

// Builds a scalar on the given tape from the parameters it binds.
using ScalarFunction = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double eps = 1e-6;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_abs_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares tape gradients with central differences for every coordinate of
// every parameter. Throws NumericError on non-finite values.
GradCheckResult grad_check(const ScalarFunction& f, std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace graphata
