#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "test_support.hpp"
#include "wgpinn/trainer.hpp"

namespace wgpinn {
namespace {

TrainConfig tiny_config(Formulation f = Formulation::kTaper) {
  TrainConfig c;
  c.problem.formulation = f;
  c.hidden_layers = 1;
  c.width = 4;
  c.grid_x = 4;
  c.grid_z = 2;
  c.n_b = 3;
  c.total_steps = 20;
  c.eval_every = 5;
  c.eval_grid = {8, 4};
  return c;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  AdamState s(3, {});
  const Vector p = Vector::LinSpaced(3, -1.0, 1.0);
  Vector q = p;
  for (int i = 0; i < 10; ++i) q = adam_step(s, q, Vector::Zero(3), 1e-2);
  EXPECT_EQ(q, p);
  EXPECT_EQ(s.steps_taken(), 10u);
}

TEST(Adam, ConstantGradientMovesByTheLearningRate) {
  AdamState s(2, {});
  Vector p = Vector::Zero(2);
  Vector g(2);
  g << 3.0, -0.02;
  const double lr = 1e-3;
  for (int i = 0; i < 200; ++i) {
    const Vector next = adam_step(s, p, g, lr);
    const Vector delta = next - p;
    EXPECT_NEAR(delta[0], -lr, 1e-9);
    EXPECT_NEAR(delta[1], lr, 1e-9);
    p = next;
  }
}

TEST(Adam, FirstStepByHand) {
  AdamHyper h{0.8, 0.9, 1e-3};
  AdamState s(1, h);
  Vector p(1), g(1);
  p << 1.0;
  g << 0.5;
  const Vector q = s.step(p, g, 0.1);
  // m̂ = g, v̂ = g²
  EXPECT_NEAR(q[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-3), 1e-15);
  EXPECT_NEAR(s.first_moment()[0], 0.2 * 0.5, 1e-15);
  EXPECT_NEAR(s.second_moment()[0], 0.1 * 0.25, 1e-15);
}

TEST(Adam, RejectsNonFiniteGradient) {
  AdamState s(2, {});
  Vector g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(s.step(Vector::Zero(2), g, 1e-3), NumericFailure);
  EXPECT_THROW(s.step(Vector::Zero(3), Vector::Zero(3), 1e-3), ContractViolation);
}

TEST(LrSchedule, ContinuousExponentialDecay) {
  const LrSchedule s;
  EXPECT_EQ(s.at(0), 5e-3);
  EXPECT_NEAR(s.at(1000) / s.at(0), 0.95, 1e-12);
  EXPECT_NEAR(s.at(50000) / s.at(0), std::pow(0.95, 50), 1e-12);
  EXPECT_NEAR(s.at(500) / s.at(0), std::sqrt(0.95), 1e-12);
  EXPECT_GT(s.at(999), s.at(1000));
}

TEST(LrSchedule, Staircase) {
  LrSchedule s;
  s.staircase = true;
  EXPECT_EQ(s.at(999), s.at(0));
  EXPECT_NEAR(s.at(1000) / s.at(0), 0.95, 1e-12);
  EXPECT_NEAR(s.at(2500) / s.at(0), 0.95 * 0.95, 1e-12);
}

TEST(LambdaAscent, RaisesTheWeightOfTheWorstPoint) {
  const ProblemSpec spec;
  const TrainingSet ts = build_training_set(spec, 2, 2, 2);
  SelfAdaptiveWeights sa;
  sa.interior = Vector::Constant(4, 1.0);
  for (auto& b : sa.boundary) b = Vector::Constant(2, 1.0);
  PointResiduals r;
  r.interior = {Complex(0.1, 0.0), Complex(3.0, -2.0), Complex(0.0, 0.0), Complex(0.0, 0.0)};
  for (auto& b : r.boundary) b = {Complex(0.0), Complex(0.0)};
  auto worst_term = [&](const SelfAdaptiveWeights& w) { return mask(w.interior[1]) * 13.0 / 4.0; };
  AdamState state(sa.size(), {});
  const double before_total = masked_report(r, sa).total;
  const double before = worst_term(sa);
  SelfAdaptiveWeights next = sa;
  next.unflatten(adam_step(state, sa.flatten(), -sa_gradient(r, sa).flatten(), 1e-2));
  EXPECT_GT(worst_term(next), before);
  EXPECT_GE(masked_report(r, next).total, before_total);
  EXPECT_GT(next.interior[1], sa.interior[1]);
  EXPECT_EQ(next.interior[2], sa.interior[2]);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.width = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.eval_every = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.problem.k = 3.0 * std::numbers::pi;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.lr.lr0 = std::numeric_limits<double>::infinity();
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Train, ZeroStepsReturnsInitialParameters) {
  TrainConfig c = tiny_config();
  c.total_steps = 0;
  const TrainResult r = train(c);
  EXPECT_FALSE(r.failed);
  EXPECT_EQ(r.steps_done, 0u);
  EXPECT_EQ(r.params.flatten(), r.initial_params.flatten());
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].step, 0u);

  SeededRng rng(c.seed);
  const NetworkParams expected = init_params(rng, make_layer_sizes(1, 4), 2.0);
  EXPECT_EQ(r.initial_params.flatten(), expected.flatten());
}

TEST(Train, IsDeterministic) {
  const TrainResult a = train(tiny_config());
  const TrainResult b = train(tiny_config());
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  EXPECT_EQ(a.sa.flatten(), b.sa.flatten());
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    EXPECT_EQ(a.trace.records[i].loss.total, b.trace.records[i].loss.total);
    EXPECT_EQ(a.trace.records[i].error.real, b.trace.records[i].error.real);
  }
}

TEST(Train, TraceCadenceAndSink) {
  std::vector<std::uint64_t> seen;
  const TrainResult r = train(tiny_config(), [&](const TraceRecord& t) { seen.push_back(t.step); });
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, 5, 10, 15, 20}));
  ASSERT_EQ(r.trace.records.size(), 5u);
  EXPECT_EQ(r.steps_done, 20u);
  EXPECT_NEAR(r.trace.records[2].lr, 5e-3 * std::pow(0.95, 0.01), 1e-15);
  EXPECT_EQ(r.trace.records.back().loss.total, r.final_loss.total);
  EXPECT_EQ(r.trace.records.back().error.real, r.final_error.real);
  EXPECT_NE(r.params.flatten(), r.initial_params.flatten());
}

TEST(Train, FinalStepIsAlwaysRecorded) {
  TrainConfig c = tiny_config();
  c.total_steps = 12;
  std::vector<std::uint64_t> seen;
  train(c, [&](const TraceRecord& t) { seen.push_back(t.step); });
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, 5, 10, 12}));
}

TEST(Train, NumericFailureIsReported) {
  TrainConfig c = tiny_config();
  c.lr.lr0 = 1e300;
  const TrainResult r = train(c);
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_FALSE(r.trace.records.empty());
}

TEST(EvaluateField, ReconstructionIdentities) {
  const NetworkParams p = testing::small_network(31, 2, 5);
  ProblemSpec taper_spec;
  ProblemSpec classical_spec;
  classical_spec.formulation = Formulation::kClassical;
  const Matrix grid = cell_center_grid(taper_spec, 240, 20);
  const auto classical = evaluate_field(p, classical_spec, grid);
  const auto taper_field = evaluate_field(p, taper_spec, grid);
  ASSERT_EQ(classical.size(), 4800u);
  for (Index i = 0; i < grid.cols(); i += 37) {
    const double x = grid(0, i), z = grid(1, i);
    const FieldValue v = forward(p, x, z);
    EXPECT_NEAR(classical[i].real(), v.re, 1e-13);
    const Complex lift = jet_value(incoming_wave(taper_spec, x, z)) * taper(taper_spec, x).value;
    EXPECT_LT(std::abs(taper_field[i] - (Complex(v.re, v.im) + lift)), 1e-13);
    if (x >= 0.0) EXPECT_EQ(taper_field[i], classical[i]);
  }
}

TEST(EvaluateField, ErrorOfAZeroNetworkIsOneForClassical) {
  SeededRng rng(1);
  NetworkParams p = init_params(rng, make_layer_sizes(1, 3), 2.0);
  for (auto& w : p.weights) w.setZero();
  ProblemSpec s;
  s.formulation = Formulation::kClassical;
  const RelativeError e = field_error(p, s, cell_center_grid(s, 240, 20));
  EXPECT_NEAR(e.real, 1.0, 1e-14);
  EXPECT_NEAR(e.imag, 1.0, 1e-14);
}

}  // namespace
}  // namespace wgpinn
