// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "riswsr/autodiff.hpp"
#include "riswsr/error.hpp"

using namespace riswsr;
using namespace riswsr::ad;

namespace {

Tensor rnd(std::mt19937_64& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : t.data) x = u(rng);
  return t;
}

// sum of all entries after an elementwise weighting that breaks symmetry
NodeId total(Tape& t, NodeId y) {
  const Shape s = t.value(y).shape;
  Tensor c(s);
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  const std::size_t n = c.size();
  return sum_axis(t, reshape(t, mul(t, y, t.constant(std::move(c))), {n}), 0);
}

}  // namespace

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
  EXPECT_THROW(Tensor({2}).item(), DimensionError);
}

TEST(Tape, AddRejectsShapeMismatch) {
  Tape t;
  const NodeId a = t.constant(Tensor({2}));
  const NodeId b = t.constant(Tensor({3}));
  EXPECT_THROW(add(t, a, b), DimensionError);
}

TEST(Gradcheck, ComposedRealOps) {
  std::mt19937_64 rng(1);
  const std::vector<Tensor> pt{rnd(rng, {3, 4}), rnd(rng, {4, 2}), rnd(rng, {3, 1}, 0.5, 1.0)};
  const auto fn = [](Tape& t, std::span<const NodeId> p) {
    const NodeId h = matmul(t, p[0], p[1]);
    const NodeId b = broadcast(t, p[2], {3, 2});
    const NodeId y = add(t, sin(t, h), mul(t, cos(t, h), b));
    return total(t, add(t, square(t, y), log(t, add(t, b, b))));
  };
  EXPECT_LT(gradcheck(fn, pt, 1e-6).max_relative_error, 1e-6);
}

TEST(Gradcheck, ComplexSolveAndMagnitude) {
  std::mt19937_64 rng(2);
  Tensor a = rnd(rng, {3, 3, 2}, -0.3, 0.3);
  for (std::size_t i = 0; i < 3; ++i) a.data[(i * 3 + i) * 2] += 2.0;
  const std::vector<Tensor> pt{a, rnd(rng, {2, 3, 2}), rnd(rng, {3, 2, 2})};
  const auto fn = [](Tape& t, std::span<const NodeId> p) {
    const NodeId x = complex_solve_right(t, p[0], p[1]);
    const NodeId y = complex_matmul(t, x, p[2]);
    return total(t, reciprocal(t, add(t, magnitude_squared(t, y), t.constant(Tensor({2, 2}, {1, 1, 1, 1})))));
  };
  EXPECT_LT(gradcheck(fn, pt, 1e-6).max_relative_error, 1e-6);
}

TEST(Backward, ConjugateCotangentConvention) {
  // f = |z|^2 for z = a + jb; the gradient pair is (2a, 2b).
  Tape t;
  const NodeId z = t.parameter(Tensor({1, 2}, {0.6, -1.3}));
  const NodeId f = sum_axis(t, magnitude_squared(t, z), 0);
  const auto g = t.backward(f);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_NEAR(g[0].data[0], 1.2, 1e-15);
  EXPECT_NEAR(g[0].data[1], -2.6, 1e-15);
}

TEST(Backward, ReplayIsBitIdentical) {
  std::mt19937_64 rng(3);
  const std::vector<Tensor> pt{rnd(rng, {4, 4}), rnd(rng, {4, 3})};
  const auto fn = [](Tape& t, std::span<const NodeId> p) {
    return total(t, relu(t, matmul(t, p[0], p[1])));
  };
  const auto a = value_and_grad(fn, pt);
  const auto b = value_and_grad(fn, pt);
  EXPECT_EQ(a.first, b.first);
  for (std::size_t i = 0; i < a.second.size(); ++i) EXPECT_EQ(a.second[i].data, b.second[i].data);
}

TEST(Backward, NonScalarOutputRejected) {
  Tape t;
  const NodeId x = t.parameter(Tensor({2}));
  EXPECT_THROW(t.backward(x), DimensionError);
}

TEST(Adam, ConvergesOnQuadratic) {
  std::vector<Tensor> theta{Tensor({1}, {0.0})};
  AdamState st = make_adam_state(theta);
  for (int i = 0; i < 100; ++i) {
    const std::vector<Tensor> g{Tensor({1}, {2.0 * (theta[0].data[0] - 2.0)})};
    adam_step(theta, g, st, 0.1, false);
  }
  EXPECT_LT(std::abs(theta[0].data[0] - 2.0), 0.1);
  EXPECT_EQ(st.step_count, 100u);
}

TEST(Adam, MaximizeAscends) {
  std::vector<Tensor> theta{Tensor({1}, {0.0})};
  AdamState st = make_adam_state(theta);
  adam_step(theta, std::vector<Tensor>{Tensor({1}, {1.0})}, st, 0.01, true);
  EXPECT_GT(theta[0].data[0], 0.0);
}
