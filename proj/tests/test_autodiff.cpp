#include "polarcore/autodiff.h"
#include "polarcore/rng.h"

#include <gtest/gtest.h>

#include <cmath>

using namespace polarcore;

namespace {

Tensor randomTensor(Rng &rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor t(r, c);
  for (double &x : t.data())
    x = rng.gaussian(0.0, scale);
  return t;
}

/// Values kept at least `gap` away from zero, for ops with a kink there.
Tensor awayFromZero(Rng &rng, std::size_t r, std::size_t c, double gap = 0.1) {
  Tensor t = randomTensor(rng, r, c);
  for (double &x : t.data())
    x = x >= 0 ? x + gap : x - gap;
  return t;
}

void expectPass(const ScalarFn &fn, const std::vector<Tensor> &inputs) {
  GradCheckReport r = gradCheck(fn, inputs, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << "max rel error " << r.maxRelError << " at input "
                        << r.worstInput << "[" << r.worstIndex << "] analytic "
                        << r.worstAnalytic << " numeric " << r.worstNumeric;
  EXPECT_GT(r.coordinates, 0u);
}

// A fixed random projection so every output coordinate influences the loss.
Var project(Tape &t, Var x, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(x, t.constant(randomTensor(rng, x.rows(), x.cols()))));
}

} // namespace

TEST(Tensor, Basics) {
  Tensor t(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.shapeString(), "(2x3)");
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1.0}), ShapeError);
  EXPECT_EQ(Tensor::identity(2), Tensor(2, 2, {1, 0, 0, 1}));
}

TEST(Primitives, MatmulIdentity) {
  Tape t;
  Var a = t.constant(Tensor(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(ad::matmul(a, t.constant(Tensor::identity(2))).value(), a.value());
  EXPECT_THROW(ad::matmul(a, t.constant(Tensor(3, 1))), ShapeError);
}

TEST(Primitives, SoftmaxUniform) {
  Tape t;
  Var p = ad::softmaxRows(t.constant(Tensor(1, 3)));
  for (double x : p.value().data())
    EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(Primitives, SoftmaxRowsSumToOneAndStableLog) {
  Rng rng(1);
  Tape t;
  Tensor x = randomTensor(rng, 4, 7, 30.0);
  x(0, 0) = 800.0;
  Var v = t.constant(x);
  Var p = ad::softmaxRows(v);
  Var lp = ad::logSoftmaxRows(v);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      s += p.value()(r, c);
      EXPECT_TRUE(std::isfinite(lp.value()(r, c)));
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Primitives, SpmmDegreeIdentity) {
  // H of (x1 v x2) & (-x1) & (-x2).
  SparseMatrix h = SparseMatrix::fromEntries(4, 3, {{0, 0, 1}, {2, 0, 1}, {1, 1, 1}, {3, 2, 1}});
  Tape t;
  Var d = ad::spmm(h, t.constant(Tensor::ones(3, 1)));
  EXPECT_EQ(d.value(), Tensor::column({1, 1, 1, 1}));
  EXPECT_THROW(ad::spmm(h, t.constant(Tensor::ones(4, 1))), ShapeError);
}

TEST(Backward, SumOfSquares) {
  Tape t;
  Var x = t.leaf(Tensor::column({1, 2, 3}), true);
  Var loss = ad::sum(ad::mul(x, x));
  t.backward(loss);
  EXPECT_EQ(x.grad(), Tensor::column({2, 4, 6}));
}

TEST(Backward, KlStationaryAtTarget) {
  Rng rng(4);
  Tensor s = randomTensor(rng, 1, 6);
  Tape t0;
  Tensor target = ad::softmaxRows(t0.constant(s)).value();
  Tape t;
  Var sv = t.leaf(s, true);
  Var lp = ad::logSoftmaxRows(sv);
  Var kl = ad::scale(ad::sum(ad::mul(t.constant(target), lp)), -1.0);
  t.backward(kl);
  for (double g : sv.grad().data())
    EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Backward, Errors) {
  Tape t;
  Var x = t.leaf(Tensor::column({1, 2}), true);
  EXPECT_THROW(t.backward(x), ShapeError);
  Var s = ad::sum(x);
  t.backward(s);
  EXPECT_THROW(t.backward(s), std::logic_error);
  EXPECT_THROW(ad::sum(x), std::logic_error);
}

TEST(Backward, UnreachedLeafGetsZeroGrad) {
  Tape t;
  Var x = t.leaf(Tensor::column({1, 2}), true);
  Var y = t.leaf(Tensor::column({3, 4}), true);
  t.backward(ad::sum(x));
  EXPECT_EQ(y.grad(), Tensor::column({0, 0}));
}

TEST(Backward, NonFiniteTrap) {
  Tape t;
  Var x = t.leaf(Tensor::column({0.0, 1.0}), true);
  EXPECT_THROW(ad::log(x), NumericError);
  Tape quiet;
  quiet.setTrapNonFinite(false);
  Var y = quiet.leaf(Tensor::column({0.0, 1.0}), true);
  EXPECT_NO_THROW(ad::log(y));
}

TEST(GradCheck, ConstantFunction) {
  GradCheckReport r = gradCheck(
      [](Tape &t, std::span<const Var>) { return t.constant(Tensor::scalar(3.0)); },
      {Tensor::column({1, 2})});
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.maxRelError, 0.0);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A pullback that deliberately doubles the true gradient.
  ScalarFn fn = [](Tape &t, std::span<const Var> in) {
    Var x = in[0];
    Tensor v = x.value();
    Var y = t.record(v, {x}, [x](Tape &tape, std::size_t self) {
      Tensor g = tape.grad(self);
      for (double &e : g.data())
        e *= 2.0;
      tape.accumulate(x.id(), g);
    });
    return ad::sum(y);
  };
  EXPECT_FALSE(gradCheck(fn, {Tensor::column({1, 2})}).passed);
}

TEST(GradCheck, EveryPrimitive) {
  Rng rng(99);
  SparseMatrix s = SparseMatrix::fromEntries(
      4, 3, {{0, 0, 0.5}, {0, 2, -1.0}, {1, 1, 2.0}, {3, 0, 0.25}, {3, 2, 1.5}});
  Tensor a = randomTensor(rng, 3, 4), b = randomTensor(rng, 4, 2), c = randomTensor(rng, 3, 4);
  Tensor k = awayFromZero(rng, 3, 4), row = randomTensor(rng, 1, 4), sc = Tensor::scalar(0.7);
  Tensor pos(3, 4);
  for (double &x : pos.data())
    x = 0.5 + rng.uniform();

  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::matmul(v[0], v[1]), 1); }, {a, b});
  expectPass([&](Tape &t, std::span<const Var> v) { return project(t, ad::spmm(s, v[0]), 2); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::add(v[0], v[1]), 3); }, {a, c});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::sub(v[0], v[1]), 4); }, {a, c});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::mul(v[0], v[1]), 5); }, {a, c});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::addRowVector(v[0], v[1]), 6); }, {a, row});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::scale(v[0], -1.7), 7); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::scaleBy(v[0], v[1]), 8); }, {sc, a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::relu(v[0]), 9); }, {k});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::tanh(v[0]), 10); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::softmaxRows(v[0]), 11); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::logSoftmaxRows(v[0]), 12); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::log(v[0]), 13); }, {pos});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::clampMin(v[0], 0.0), 14); }, {k});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::concatCols({v[0], v[1]}), 15); }, {a, c});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::concatRows({v[0], v[1]}), 16); }, {a, c});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::rowPermute(v[0], {2, 0, 0, 1}), 17); }, {a});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::rowSlice(v[0], 1, 2, 2), 18); }, {b});
  expectPass([](Tape &t, std::span<const Var> v) { return project(t, ad::transpose(v[0]), 19); }, {a});
  expectPass([](Tape &, std::span<const Var> v) { return ad::sum(v[0]); }, {a});
  expectPass([](Tape &, std::span<const Var> v) { return ad::mean(v[0]); }, {a});
  expectPass([](Tape &, std::span<const Var> v) { return ad::squaredL2(v[0]); }, {a});
}

TEST(GradCheck, FiveLayerComposite) {
  Rng rng(5);
  std::vector<Tensor> inputs{randomTensor(rng, 6, 5)};
  for (int l = 0; l < 5; ++l) {
    inputs.push_back(randomTensor(rng, 5, 5, 0.5));
    inputs.push_back(randomTensor(rng, 1, 5, 0.1));
  }
  ScalarFn fn = [](Tape &, std::span<const Var> v) {
    Var h = v[0];
    for (int l = 0; l < 5; ++l)
      h = ad::tanh(ad::addRowVector(ad::matmul(h, v[1 + 2 * l]), v[2 + 2 * l]));
    return ad::mean(ad::logSoftmaxRows(h));
  };
  expectPass(fn, inputs);
}

TEST(Primitives, ForwardValuesDeterministic) {
  Rng r1(8), r2(8);
  Tensor a = randomTensor(r1, 5, 5), b = randomTensor(r2, 5, 5);
  Tape t1, t2;
  EXPECT_EQ(ad::softmaxRows(ad::matmul(t1.constant(a), t1.constant(a))).value(),
            ad::softmaxRows(ad::matmul(t2.constant(b), t2.constant(b))).value());
}

TEST(Primitives, ShapeErrors) {
  Tape t;
  Var a = t.constant(Tensor(2, 3)), b = t.constant(Tensor(3, 2));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::addRowVector(a, t.constant(Tensor(1, 2))), ShapeError);
  EXPECT_THROW(ad::scaleBy(a, b), ShapeError);
  EXPECT_THROW(ad::concatCols({a, b}), ShapeError);
  EXPECT_THROW(ad::rowPermute(a, {5}), ShapeError);
  EXPECT_THROW(ad::rowSlice(a, 1, 2, 1), ShapeError);
}
