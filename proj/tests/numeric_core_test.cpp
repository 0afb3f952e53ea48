#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "graphata/autodiff.hpp"
#include "graphata/errors.hpp"
#include "graphata/optim.hpp"
#include "graphata/sparse.hpp"
#include "test_util.hpp"

using namespace graphata;
using graphata::testing::random_off_zero;
using graphata::testing::random_tensor;

namespace {

SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  std::vector<Triplet> triplets;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (rng.bernoulli(density)) triplets.push_back({r, c, rng.uniform(-2.0, 2.0)});
  return SparseMatrix::from_triplets(rows, cols, std::move(triplets));
}

// Weighted sum so that every output coordinate carries a distinct upstream gradient.
Var probe(Tape& tape, Var y, const Tensor& weights) { return sum(hadamard(y, tape.constant(weights))); }

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  const Tensor m = Tensor::matrix({{1.5, -2.0, 3.0}, {0.25, 4.0, -1.0}});
  Var out = matmul(tape.constant(Tensor::identity(2)), tape.constant(m));
  EXPECT_EQ(out.value(), m);
}

TEST(Matmul, HandCheckedProduct) {
  Tape tape;
  Var out = matmul(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})), tape.constant(Tensor::matrix({{0}, {1}})));
  EXPECT_EQ(out.value(), Tensor::matrix({{2}, {4}}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Tape tape;
  EXPECT_THROW(matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))), ShapeError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  Parameter a("a", random_tensor({5, 4}, rng));
  Parameter b("b", random_tensor({4, 3}, rng));
  std::vector<Parameter*> params{&a, &b};
  auto f = [&](Tape& t) { return sum(matmul(t.parameter(a), t.parameter(b))); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Spmm, SparseIdentityLeavesMatrixUnchanged) {
  Rng rng(3);
  const Tensor m = random_tensor({4, 3}, rng);
  Tape tape;
  EXPECT_EQ(spmm(SparseMatrix::identity(4), tape.constant(m)).value(), m);
}

TEST(Spmm, SingleRowSelectsSecondRow) {
  const SparseMatrix s = SparseMatrix::from_triplets(1, 3, {{0, 1, 1.0}});
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  Tape tape;
  EXPECT_EQ(spmm(s, tape.constant(m)).value(), Tensor::matrix({{3, 4}}));
}

TEST(Spmm, MatchesDenseMatmulOnRandomInstances) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(12), k = 1 + rng.below(12), n = 1 + rng.below(6);
    const SparseMatrix s = random_sparse(m, k, 0.3, rng);
    const Tensor d = random_tensor({k, n}, rng);
    Tape tape;
    const Tensor sparse_out = spmm(s, tape.constant(d)).value();
    const Tensor dense_out = matmul(s.to_dense(), d);
    EXPECT_LT(max_abs_diff(sparse_out, dense_out), 1e-12);
  }
}

TEST(Spmm, DimensionMismatchThrows) {
  Tape tape;
  EXPECT_THROW(spmm(SparseMatrix::identity(3), tape.constant(Tensor({4, 2}))), ShapeError);
}

TEST(Spmm, GradientIsTransposeProduct) {
  Rng rng(8);
  const SparseMatrix s = random_sparse(6, 5, 0.4, rng);
  const Tensor w = random_tensor({6, 3}, rng);
  Parameter d("d", random_tensor({5, 3}, rng));
  std::vector<Parameter*> params{&d};
  auto f = [&](Tape& t) { return probe(t, spmm(s, t.parameter(d)), w); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(SparseMatrix, RejectsUnsortedColumns) {
  EXPECT_THROW(SparseMatrix(1, 3, {0, 2}, {2, 1}, {1.0, 1.0}), ShapeError);
  EXPECT_THROW(SparseMatrix(1, 3, {0, 1}, {3}, {1.0}), ShapeError);
  EXPECT_THROW(SparseMatrix(2, 3, {0, 1}, {0}, {1.0}), ShapeError);
}

TEST(SparseMatrix, TripletDuplicatesAreSummed) {
  const SparseMatrix s = SparseMatrix::from_triplets(2, 2, {{1, 0, 1.0}, {0, 1, 2.0}, {1, 0, 0.5}});
  EXPECT_EQ(s.nonzeros(), 2u);
  EXPECT_DOUBLE_EQ(s.at(1, 0), 1.5);
  EXPECT_DOUBLE_EQ(s.at(0, 0), 0.0);
}

TEST(Relu, ClampsNegatives) {
  Tape tape;
  EXPECT_EQ(relu(tape.constant(Tensor::vector({-1, 0, 2}))).value(), Tensor::vector({0, 0, 2}));
}

TEST(Relu, AllNegativeGivesZeroOutputAndGradient) {
  Parameter x("x", Tensor::matrix({{-1, -2}, {-0.5, -3}}));
  Tape tape;
  Var y = relu(tape.parameter(x));
  EXPECT_EQ(y.value(), Tensor({2, 2}));
  tape.backward(sum(y));
  EXPECT_EQ(*x.grad, Tensor({2, 2}));
}

TEST(Relu, GradientMatchesFiniteDifferencesOffKinks) {
  Rng rng(13);
  Parameter x("x", random_off_zero({4, 5}, rng));
  const Tensor w = random_tensor({4, 5}, rng);
  std::vector<Parameter*> params{&x};
  auto f = [&](Tape& t) { return probe(t, relu(t.parameter(x)), w); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(RowSoftmax, SymmetricRowIsUniform) {
  Tape tape;
  const Tensor p = row_softmax(tape.constant(Tensor::matrix({{0, 0}}))).value();
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(RowSoftmax, LargeLogitsDoNotOverflow) {
  Tape tape;
  const Tensor p = row_softmax(tape.constant(Tensor::matrix({{1000, 0}}))).value();
  EXPECT_TRUE(all_finite(p));
  EXPECT_DOUBLE_EQ(p(0, 0), 1.0);
  EXPECT_LT(p(0, 1), 1e-300);
}

TEST(RowSoftmax, RowsAreShiftInvariantDistributions) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(5), k = 1 + rng.below(6);
    Tensor x = random_tensor({n, k}, rng, -10.0, 10.0);
    Tensor shifted = x;
    for (std::size_t r = 0; r < n; ++r) {
      const double c = rng.uniform(-50.0, 50.0);
      for (double& v : shifted.row(r)) v += c;
    }
    Tape tape;
    const Tensor p = row_softmax(tape.constant(x)).value();
    const Tensor q = row_softmax(tape.constant(shifted)).value();
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (double v : p.row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_LT(max_abs_diff(p, q), 1e-12);
  }
}

TEST(RowSoftmax, JacobianVectorProductsMatchFiniteDifferences) {
  Rng rng(19);
  Parameter x("x", random_tensor({3, 4}, rng, -2.0, 2.0));
  const Tensor w = random_tensor({3, 4}, rng);
  std::vector<Parameter*> params{&x};
  auto f = [&](Tape& t) { return probe(t, row_softmax(t.parameter(x)), w); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Tape, ConstantsNeverReceiveGradient) {
  Parameter w("w", Tensor::matrix({{2.0}}));
  Tape tape;
  Var c = tape.constant(Tensor::matrix({{3.0}}));
  Var y = matmul(c, tape.parameter(w));
  EXPECT_FALSE(tape.requires_grad(c));
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad_buffer(c), nullptr);
  EXPECT_DOUBLE_EQ((*w.grad)[0], 3.0);
}

TEST(Tape, FanOutAccumulatesAndEachRuleRunsOnce) {
  Parameter x("x", Tensor::vector({1.0, -2.0, 0.5}));
  Tape tape;
  Var xv = tape.parameter(x);
  // f = sum(x ⊙ x) + sum(x): gradient 2x + 1.
  Var f = add(sum(hadamard(xv, xv)), sum(xv));
  tape.backward(f);
  EXPECT_EQ(tape.backward_calls(), 4u);
  EXPECT_DOUBLE_EQ((*x.grad)[0], 3.0);
  EXPECT_DOUBLE_EQ((*x.grad)[1], -3.0);
  EXPECT_DOUBLE_EQ((*x.grad)[2], 2.0);
}

TEST(Tape, BackwardRequiresScalarRoot) {
  Parameter x("x", Tensor::vector({1.0, 2.0}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(x)), UsageError);
}

TEST(Tape, UnreachedParameterGetsZeroGradient) {
  Parameter used("used", Tensor::vector({1.0}));
  Parameter unused("unused", Tensor::vector({1.0}));
  Tape tape;
  tape.parameter(unused);
  tape.backward(sum(tape.parameter(used)));
  ASSERT_TRUE(unused.grad.has_value());
  EXPECT_DOUBLE_EQ((*unused.grad)[0], 0.0);
}

TEST(Primitives, CompositeGradientsMatchFiniteDifferences) {
  Rng rng(23);
  Parameter a("a", random_tensor({4, 3}, rng));
  Parameter b("b", random_tensor({4, 3}, rng));
  Parameter w("w", random_tensor({4, 2}, rng));
  Parameter v("v", random_tensor({2}, rng));
  const Tensor probe_weights = random_tensor({4, 10}, rng);
  std::vector<Parameter*> params{&a, &b, &w, &v};
  auto f = [&](Tape& t) {
    Var av = t.parameter(a), bv = t.parameter(b), wv = t.parameter(w), vv = t.parameter(v);
    Var terms[] = {hadamard(av, bv), scale(av, -0.7)};
    Var mixed = row_weighted_sum(wv, terms);
    Var global = weighted_sum(vv, terms);
    Var parts[] = {mixed, append_ones_column(global), reshape(reshape(bv, {12}), {4, 3})};
    Var wide = concat_cols(parts);
    return probe(t, wide, probe_weights);
  };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Primitives, SegmentReadoutGradient) {
  Rng rng(29);
  Parameter h("h", random_tensor({7, 3}, rng));
  const std::vector<std::size_t> offsets{0, 3, 4, 7};
  const Tensor w = random_tensor({3, 6}, rng);
  std::vector<Parameter*> params{&h};
  auto f = [&](Tape& t) { return probe(t, segment_mean_max(t.parameter(h), offsets), w); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Primitives, NeighborExtremeGradientAndIsolatedFallback) {
  Rng rng(31);
  // Path 0-1-2 plus isolated node 3.
  const SparseMatrix adj = SparseMatrix::from_triplets(4, 4, {{0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 1, 1}});
  Parameter h("h", random_tensor({4, 3}, rng));
  Tape tape;
  const Tensor mx = neighbor_extreme(tape.parameter(h), adj, true).value();
  const Tensor mn = neighbor_extreme(tape.parameter(h), adj, false).value();
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(mx(1, c), std::max(h.value(0, c), h.value(2, c)));
    EXPECT_DOUBLE_EQ(mn(1, c), std::min(h.value(0, c), h.value(2, c)));
    EXPECT_DOUBLE_EQ(mx(3, c), h.value(3, c));
  }
  const Tensor w = random_tensor({4, 3}, rng);
  std::vector<Parameter*> params{&h};
  auto f = [&](Tape& t) { return probe(t, neighbor_extreme(t.parameter(h), adj, true), w); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Primitives, SoftmaxCrossEntropyGradient) {
  Rng rng(37);
  Parameter z("z", random_tensor({5, 3}, rng, -2, 2));
  const std::vector<int> labels{0, 2, 1, 1, 0};
  const std::vector<std::size_t> rows{0, 2, 3};
  std::vector<Parameter*> params{&z};
  auto f = [&](Tape& t) { return softmax_cross_entropy(t.parameter(z), labels, rows); };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter w("w", Tensor::vector({1.0, -2.0}));
  AdamState adam({.learning_rate = 0.1});
  std::vector<Parameter*> params{&w};
  for (int i = 0; i < 5; ++i) {
    w.grad = Tensor({2});
    adam.step(params);
  }
  EXPECT_EQ(w.value, Tensor::vector({1.0, -2.0}));
  EXPECT_FALSE(w.grad.has_value());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // m̂ = g and v̂ = g² after bias correction, so the step is lr·g/(|g|+eps).
  Parameter w("w", Tensor::vector({0.0}));
  AdamState adam({.learning_rate = 0.1});
  std::vector<Parameter*> params{&w};
  w.grad = Tensor::vector({1.0});
  adam.step(params);
  EXPECT_NEAR(w.value[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(Adam, ConvergesOnConvexQuadratic) {
  Parameter w("w", Tensor::vector({0.0}));
  AdamState adam({.learning_rate = 0.05});
  std::vector<Parameter*> params{&w};
  for (int i = 0; i < 500; ++i) {
    Tape tape;
    Var wv = tape.parameter(w);
    Var diff = add(wv, tape.constant(Tensor::vector({-3.0})));
    tape.backward(sum(hadamard(diff, diff)));
    adam.step(params);
  }
  EXPECT_LT(std::abs(w.value[0] - 3.0), 1e-2);
}

TEST(Adam, DecoupledWeightDecayShrinksWithoutGradient) {
  Parameter w("w", Tensor::vector({2.0}));
  AdamState adam({.learning_rate = 0.1, .weight_decay = 0.5});
  std::vector<Parameter*> params{&w};
  w.grad = Tensor({1});
  adam.step(params);
  EXPECT_DOUBLE_EQ(w.value[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Adam, MissingGradientIsUsageError) {
  Parameter w("w", Tensor::vector({1.0}));
  AdamState adam;
  std::vector<Parameter*> params{&w};
  EXPECT_THROW(adam.step(params), UsageError);
}

TEST(GradCheck, SumOfSquaresIsExact) {
  Rng rng(41);
  Parameter x("x", random_tensor({3, 3}, rng));
  std::vector<Parameter*> params{&x};
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    return sum(hadamard(v, v));
  };
  EXPECT_LT(grad_check(f, params).max_relative_error, 1e-8);
}

TEST(GradCheck, ConstantFunctionHasZeroGradients) {
  Parameter x("x", Tensor::vector({0.3, -0.2}));
  std::vector<Parameter*> params{&x};
  const GradCheckOptions options;
  auto f = [&](Tape& t) {
    t.parameter(x);
    return t.constant(Tensor::vector({4.0}));
  };
  const GradCheckResult r = grad_check(f, params, options);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_LT(r.max_abs_numeric, options.eps);
}

TEST(GradCheck, NonFiniteValueIsNumericError) {
  Parameter x("x", Tensor::vector({1.0}));
  std::vector<Parameter*> params{&x};
  auto f = [&](Tape& t) {
    Var v = t.parameter(x);
    return scale(sum(v), std::numeric_limits<double>::infinity());
  };
  EXPECT_THROW(grad_check(f, params), NumericError);
}

TEST(Memory, AllocationCounterTracksPeak) {
  memory::reset_peak();
  const auto before = memory::stats();
  {
    Tensor big({1000, 100});
    EXPECT_GE(memory::stats().current_bytes, before.current_bytes + 800000);
  }
  EXPECT_EQ(memory::stats().current_bytes, before.current_bytes);
  EXPECT_GE(memory::stats().peak_bytes, before.current_bytes + 800000);
}
