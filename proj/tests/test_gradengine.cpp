#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <memory>

#include "test_support.hpp"
#include "wgpinn/gradengine.hpp"

namespace wgpinn {
namespace {

using testing::small_network;

Var half_norm_squared(Tape& t, const ParamVars& v) {
  Var acc = t.constant(Matrix::Zero(1, 1));
  auto add = [&](Var x) { acc = t.add(acc, t.scale(t.sum(t.square(x)), 0.5)); };
  for (Var w : v.weights) add(w);
  for (Var b : v.biases) add(b);
  for (Var a : v.alphas) add(a);
  return acc;
}

LossFn jet_entry_squared(Matrix points, Index row, JetBlock block) {
  return [points, row, block](Tape& t, const ParamVars& v) {
    const Var jet = record_jet_network(t, v, points);
    const Index p = points.cols();
    return t.sum(t.square(t.slice(jet, row, block * p, 1, p)));
  };
}

Matrix two_points() {
  Matrix pts(2, 2);
  pts << 0.3, -1.1, 0.6, 0.25;
  return pts;
}

TEST(GradEngine, HalfNormSquaredGradientIsTheParameters) {
  const NetworkParams p = small_network(2, 2, 4);
  const GradResult r = grad_loss(p, half_norm_squared);
  EXPECT_NEAR(r.loss, 0.5 * p.flatten().squaredNorm(), 1e-12);
  EXPECT_LT((r.grad.flatten() - p.flatten()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GradEngine, OutputSquaredMatchesFiniteDifferences) {
  const NetworkParams p = small_network(3, 2, 5);
  EXPECT_LT(fd_check(p, jet_entry_squared(two_points(), 0, kValue), 40, 1e-6), 1e-5);
  EXPECT_LT(fd_check(p, jet_entry_squared(two_points(), 1, kValue), 40, 1e-6), 1e-5);
}

TEST(GradEngine, SecondDerivativeSquaredMatchesFiniteDifferences) {
  const NetworkParams p = small_network(4, 2, 5);
  EXPECT_LT(fd_check(p, jet_entry_squared(two_points(), 0, kDxx), 40, 1e-6), 1e-4);
  EXPECT_LT(fd_check(p, jet_entry_squared(two_points(), 1, kDzz), 40, 1e-6), 1e-4);
  EXPECT_LT(fd_check(p, jet_entry_squared(two_points(), 0, kDz), 40, 1e-6), 1e-4);
}

TEST(GradEngine, JetNodeMatchesNetworkJets) {
  const NetworkParams p = small_network(5, 3, 4);
  Tape t;
  const ParamVars v = bind_params(t, p);
  const Var jet = record_jet_network(t, v, two_points());
  const Matrix expected = jet_forward_batch(p, two_points());
  EXPECT_LT((t.value(jet) - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(GradEngine, UnsupportedPrimitiveIsRejected) {
  Tape t;
  const Var a = t.leaf(Matrix::Ones(2, 2));
  const std::array<Var, 1> args{a};
  EXPECT_THROW(t.apply("sinh", args), UnsupportedOperation);
  EXPECT_NO_THROW(t.apply("tanh", args));
  EXPECT_NO_THROW(t.apply("square", args));
}

TEST(GradEngine, NamedPrimitivesMatchDirectCalls) {
  Tape t;
  Matrix m(2, 2);
  m << 1, -2, 0.5, 3;
  const Var a = t.leaf(m);
  const Var b = t.leaf(m.transpose());
  const std::array<Var, 2> ab{a, b};
  EXPECT_EQ(t.value(t.apply("add", ab)), m + m.transpose());
  EXPECT_EQ(t.value(t.apply("mul", ab)), m.cwiseProduct(m.transpose()));
  const std::array<Var, 1> only{a};
  EXPECT_EQ(t.value(t.apply("neg", only)), -m);
  EXPECT_EQ(t.scalar(t.apply("sum", only)), m.sum());
}

TEST(GradEngine, ReplayReproducesRecordedValue) {
  const NetworkParams p = small_network(6, 2, 6);
  Tape t;
  const ParamVars v = bind_params(t, p);
  const Var out = jet_entry_squared(two_points(), 0, kDxx)(t, v);
  const double recorded = t.scalar(out);
  EXPECT_NEAR(t.replay(out), recorded, 1e-12);
}

TEST(GradEngine, BackwardVisitsEveryNodeOnce) {
  const NetworkParams p = small_network(7, 2, 3);
  Tape t;
  const ParamVars v = bind_params(t, p);
  const Var out = jet_entry_squared(two_points(), 1, kDx)(t, v);
  t.backward(out);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Var node = t.node(i);
    EXPECT_LE(t.visits(node), 1u);
  }
  EXPECT_EQ(t.visits(out), 1u);
  for (Var w : v.weights) EXPECT_EQ(t.visits(w), 1u);
}

TEST(GradEngine, BackwardRequiresScalarOutput) {
  Tape t;
  const Var a = t.leaf(Matrix::Ones(2, 1));
  EXPECT_THROW(t.backward(a), ContractViolation);
}

TEST(GradEngine, GradientIsLinearInTheLoss) {
  const NetworkParams p = small_network(8, 2, 4);
  const LossFn f = jet_entry_squared(two_points(), 0, kValue);
  const LossFn g = jet_entry_squared(two_points(), 1, kDxx);
  const LossFn combo = [&](Tape& t, const ParamVars& v) {
    return t.add(f(t, v), t.scale(g(t, v), 2.0));
  };
  const Vector gf = grad_loss(p, f).grad.flatten();
  const Vector gg = grad_loss(p, g).grad.flatten();
  const Vector gc = grad_loss(p, combo).grad.flatten();
  EXPECT_LT((gc - (gf + 2.0 * gg)).cwiseAbs().maxCoeff(),
            1e-12 * std::max(1.0, gc.cwiseAbs().maxCoeff()));
}

TEST(FdCheck, ExactOnQuadratics) {
  const NetworkParams p = small_network(9, 2, 4);
  EXPECT_LT(fd_check(p, half_norm_squared, 30, 1e-4), 1e-9);
}

TEST(FdCheck, CoarseStepIsLessAccurate) {
  const NetworkParams p = small_network(10, 2, 5);
  const LossFn f = jet_entry_squared(two_points(), 0, kDxx);
  EXPECT_GT(fd_check(p, f, 30, 1e-2, 1), fd_check(p, f, 30, 1e-6, 1));
}

TEST(FdCheck, Validation) {
  const NetworkParams p = small_network(10, 1, 2);
  EXPECT_THROW(fd_check(p, half_norm_squared, 0, 1e-6), ContractViolation);
  EXPECT_THROW(fd_check(p, half_norm_squared, 3, 0.0), ContractViolation);
}

}  // namespace
}  // namespace wgpinn
