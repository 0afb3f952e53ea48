#include "graphata/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "graphata/errors.hpp"

namespace graphata {

void AdamState::step(std::span<Parameter* const> params) {
  if (first_moment_.empty()) {
    for (const Parameter* p : params) {
      first_moment_.emplace_back(p->value.shape());
      second_moment_.emplace_back(p->value.shape());
    }
  }
  if (first_moment_.size() != params.size()) {
    throw UsageError("adam: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad) throw UsageError("adam: parameter '" + params[i]->name + "' has no gradient");
    check_same_shape(params[i]->value, first_moment_[i], "adam moments");
  }
  ++step_;
  const auto& o = options_;
  const double bias1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto w = p.value.data();
    auto g = p.grad->data();
    auto m = first_moment_[i].data();
    auto v = second_moment_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      if (o.weight_decay > 0.0) w[k] -= o.learning_rate * o.weight_decay * w[k];
      w[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
    p.zero_grad();
  }
}

namespace {

double evaluate(const ScalarFunction& f) {
  Tape tape;
  const Tensor& v = f(tape).value();
  if (v.size() != 1) throw UsageError("grad_check: function must return a scalar");
  return v[0];
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    if (!std::isfinite(out.value()[0])) throw NumericError("grad_check: non-finite function value");
    tape.backward(out);
  }
  GradCheckResult result;
  for (Parameter* p : params) {
    if (!p->grad) throw UsageError("grad_check: parameter '" + p->name + "' is not bound by the function");
    const Tensor analytic = *p->grad;
    if (!all_finite(analytic)) throw NumericError("grad_check: non-finite gradient for '" + p->name + "'");
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double original = p->value[k];
      p->value[k] = original + options.eps;
      const double up = evaluate(f);
      p->value[k] = original - options.eps;
      const double down = evaluate(f);
      p->value[k] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite value while perturbing '" + p->name + "'");
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), options.floor});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic[k] - numeric) / denom);
      result.max_abs_numeric = std::max(result.max_abs_numeric, std::abs(numeric));
      ++result.coordinates;
    }
    p->zero_grad();
  }
  return result;
}

}  // namespace graphata
