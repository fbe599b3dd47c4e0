#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "test_support.hpp"
#include "wgpinn/lossbuilder.hpp"

namespace wgpinn {
namespace {

using testing::small_network;

constexpr BoundaryId kEdges[] = {BoundaryId::kBottom, BoundaryId::kTop, BoundaryId::kMinus,
                                 BoundaryId::kPlus};

ProblemSpec spec_for(Formulation f, double k = 8.0) {
  ProblemSpec s;
  s.k = k;
  s.formulation = f;
  return s;
}

/// Residuals computed point by point through the physics layer.
PointResiduals pointwise_residuals(const ProblemSpec& spec, const DtNContext& ctx,
                                   const TrainingSet& ts,
                                   const std::function<ComplexJet(double, double)>& field) {
  PointResiduals r;
  for (Index i = 0; i < ts.interior_count(); ++i) {
    const double x = ts.interior(0, i), z = ts.interior(1, i);
    r.interior.push_back(pde_residual(spec, field(x, z), x, z));
  }
  for (BoundaryId id : kEdges) {
    std::vector<BoundarySample> samples;
    std::vector<ComplexJet> jets;
    for (Index j = 0; j < ts.boundary_count(id); ++j) {
      const double x = ts.edge(id)(0, j), z = ts.edge(id)(1, j);
      samples.push_back(make_boundary_sample(spec, id, x, z));
      jets.push_back(field(x, z));
    }
    r.boundary[static_cast<std::size_t>(id)] = boundary_residual(spec, ctx, samples, jets);
  }
  return r;
}

SelfAdaptiveWeights filled(const TrainingSet& ts, double value) {
  SelfAdaptiveWeights sa;
  sa.interior = Vector::Constant(ts.interior_count(), value);
  for (BoundaryId id : kEdges) sa.edge(id) = Vector::Constant(ts.boundary_count(id), value);
  return sa;
}

TEST(TrainingSet, CountsAndPositions) {
  const ProblemSpec s = spec_for(Formulation::kTaper);
  const TrainingSet ts = build_training_set(s, 120, 10, 80);
  EXPECT_EQ(ts.interior_count(), 1200);
  for (BoundaryId id : kEdges) EXPECT_EQ(ts.boundary_count(id), 80);
  EXPECT_NEAR(ts.interior(0, 0), -2.0 + 2.0 / 120.0, 1e-15);
  EXPECT_NEAR(ts.interior(1, 0), 0.05, 1e-15);
  EXPECT_NEAR(ts.interior(1, 1), 0.15, 1e-15);
  EXPECT_NEAR(ts.interior(0, 10), -2.0 + 3.0 * 2.0 / 120.0, 1e-15);
  EXPECT_EQ(ts.edge(BoundaryId::kBottom)(0, 0), -2.0);
  EXPECT_EQ(ts.edge(BoundaryId::kTop)(0, 79), 2.0);
  EXPECT_EQ(ts.edge(BoundaryId::kTop)(1, 5), 1.0);
  EXPECT_NEAR(ts.edge(BoundaryId::kMinus)(1, 0), 1.0 / 81.0, 1e-15);
  EXPECT_EQ(ts.edge(BoundaryId::kPlus)(0, 3), 2.0);
  for (Index i = 0; i < ts.interior_count(); ++i) {
    EXPECT_GT(ts.interior(0, i), -2.0);
    EXPECT_LT(ts.interior(0, i), 2.0);
    EXPECT_GT(ts.interior(1, i), 0.0);
    EXPECT_LT(ts.interior(1, i), 1.0);
  }
  EXPECT_THROW(build_training_set(s, 1, 10, 80), ContractViolation);
}

TEST(SelfAdaptiveWeights, InitialRangesAndLayout) {
  const TrainingSet ts = build_training_set(spec_for(Formulation::kTaper), 20, 5, 30);
  SeededRng rng(11);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  EXPECT_GE(sa.interior.minCoeff(), 0.0);
  EXPECT_LT(sa.interior.maxCoeff(), 0.5);
  for (BoundaryId id : {BoundaryId::kBottom, BoundaryId::kTop}) {
    EXPECT_GE(sa.edge(id).minCoeff(), 0.0);
    EXPECT_LT(sa.edge(id).maxCoeff(), 30.0);
    EXPECT_GT(sa.edge(id).maxCoeff(), 10.0);
  }
  for (BoundaryId id : {BoundaryId::kMinus, BoundaryId::kPlus}) {
    EXPECT_GE(sa.edge(id).minCoeff(), 0.0);
    EXPECT_LT(sa.edge(id).maxCoeff(), 10.0);
  }
  ASSERT_EQ(sa.size(), 100 + 4 * 30);
  const Vector flat = sa.flatten();
  EXPECT_EQ(flat[0], sa.interior[0]);
  EXPECT_EQ(flat[100], sa.edge(BoundaryId::kBottom)[0]);
  EXPECT_EQ(flat[100 + 3 * 30], sa.edge(BoundaryId::kPlus)[0]);
  SelfAdaptiveWeights copy = filled(ts, 0.0);
  copy.unflatten(flat);
  EXPECT_EQ(copy.flatten(), flat);
  EXPECT_THROW(copy.unflatten(Vector::Zero(3)), ContractViolation);
}

class LossTest : public ::testing::TestWithParam<Formulation> {
 protected:
  ProblemSpec spec = spec_for(GetParam());
  TrainingSet ts = build_training_set(spec, 8, 4, 6);
  DtNContext ctx{spec, 6};
  NetworkParams params = small_network(21, 2, 6);
};

TEST_P(LossTest, AssemblerMatchesPointwisePhysics) {
  const LossAssembler assembler(spec, ts, ctx);
  SeededRng rng(3);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossEvaluation e = assembler.evaluate(params, sa, false);
  const PointResiduals ref = pointwise_residuals(
      spec, ctx, ts, [&](double x, double z) { return jet_forward(params, x, z); });
  ASSERT_EQ(e.residuals.interior.size(), ref.interior.size());
  for (std::size_t i = 0; i < ref.interior.size(); ++i) {
    EXPECT_LT(std::abs(e.residuals.interior[i] - ref.interior[i]), 1e-11);
  }
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t i = 0; i < ref.boundary[b].size(); ++i) {
      EXPECT_LT(std::abs(e.residuals.boundary[b][i] - ref.boundary[b][i]), 1e-11);
    }
  }
  const LossReport direct = masked_report(ref, sa);
  EXPECT_NEAR(e.report.total, direct.total, 1e-10 * direct.total);
}

TEST_P(LossTest, ZeroWeightsGiveZeroLoss) {
  const LossAssembler assembler(spec, ts, ctx);
  EXPECT_EQ(assembler.evaluate(params, filled(ts, 0.0), false).report.total, 0.0);
}

TEST_P(LossTest, DoublingWeightsQuadruplesLoss) {
  const LossAssembler assembler(spec, ts, ctx);
  SeededRng rng(5);
  SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const double once = assembler.evaluate(params, sa, false).report.total;
  sa.unflatten(2.0 * sa.flatten());
  EXPECT_NEAR(assembler.evaluate(params, sa, false).report.total, 4.0 * once, 1e-12 * once);
}

TEST_P(LossTest, TotalIsTheSumOfItsTerms) {
  SeededRng rng(6);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossReport r = total_loss(params, sa, ts, spec, ctx);
  double sum = r.residual_term;
  for (double t : r.boundary_terms) {
    EXPECT_GE(t, 0.0);
    sum += t;
  }
  EXPECT_NEAR(r.total, sum, 1e-13 * r.total);
}

TEST_P(LossTest, RaisingOneWeightNeverLowersTheLoss) {
  SeededRng rng(7);
  SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossAssembler assembler(spec, ts, ctx);
  const PointResiduals r = assembler.evaluate(params, sa, false).residuals;
  double prev = masked_report(r, sa).total;
  for (Index i = 0; i < sa.interior.size(); i += 5) {
    sa.interior[i] += 0.25;
    const double now = masked_report(r, sa).total;
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST_P(LossTest, WeightGradientMatchesFiniteDifferences) {
  SeededRng rng(8);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossAssembler assembler(spec, ts, ctx);
  const LossEvaluation e = assembler.evaluate(params, sa, true);
  const Vector analytic = e.sa_grad.flatten();
  EXPECT_EQ(analytic, sa_gradient(e.residuals, sa).flatten());
  const Vector base = sa.flatten();
  // The loss is quadratic in each weight, so a wide step is exact.
  const double h = 1e-3;
  double worst = 0.0;
  for (Index i = 0; i < base.size(); ++i) {
    SelfAdaptiveWeights plus = sa, minus = sa;
    Vector vp = base, vm = base;
    vp[i] += h;
    vm[i] -= h;
    plus.unflatten(vp);
    minus.unflatten(vm);
    const double fd =
        (masked_report(e.residuals, plus).total - masked_report(e.residuals, minus).total) / (2 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(std::abs(analytic[i]), 1e-8));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST_P(LossTest, ParameterGradientMatchesFiniteDifferences) {
  SeededRng rng(9);
  const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
  const LossAssembler assembler(spec, ts, ctx);
  EXPECT_LT(fd_check(params, assembler.loss_fn(sa), 30, 1e-6, 4), 1e-4);
  const LossEvaluation e = assembler.evaluate(params, sa, true);
  const GradResult g = grad_loss(params, assembler.loss_fn(sa));
  EXPECT_NEAR(g.loss, e.report.total, 1e-12 * e.report.total);
  EXPECT_LT((g.grad.flatten() - e.grad.flatten()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST_P(LossTest, ExactSolutionHasNegligibleLoss) {
  const ProblemSpec s = spec;
  const PointResiduals r = pointwise_residuals(s, ctx, ts, [&](double x, double z) {
    const ComplexJet w = incoming_wave(s, x, z);
    return s.formulation == Formulation::kTaper ? w - multiply_by_profile(w, taper(s, x)) : w;
  });
  EXPECT_LT(masked_report(r, filled(ts, 1.0)).total, 1e-16);
}

INSTANTIATE_TEST_SUITE_P(BothFormulations, LossTest,
                         ::testing::Values(Formulation::kClassical, Formulation::kTaper),
                         [](const auto& info) { return to_string(info.param); });

TEST(MaskedReport, HandComputedTerms) {
  const TrainingSet ts = build_training_set(spec_for(Formulation::kTaper), 2, 2, 2);
  SelfAdaptiveWeights sa = filled(ts, 1.0);
  sa.interior << 1.0, 2.0, 0.0, 0.0;
  PointResiduals r;
  r.interior = {Complex(1, 1), Complex(0, 1), Complex(5, 5), Complex(0, 0)};
  for (auto& b : r.boundary) b = {Complex(0, 0), Complex(0, 0)};
  r.boundary[1] = {Complex(3, 0), Complex(0, 4)};
  const LossReport rep = masked_report(r, sa);
  EXPECT_NEAR(rep.residual_term, (1.0 * 2.0 + 4.0 * 1.0) / 4.0, 1e-15);
  EXPECT_NEAR(rep.boundary_terms[1], (9.0 + 16.0) / 2.0, 1e-15);
  EXPECT_NEAR(rep.total, 1.5 + 12.5, 1e-15);
  const SelfAdaptiveWeights g = sa_gradient(r, sa);
  EXPECT_NEAR(g.interior[1], 2.0 * 2.0 * 1.0 / 4.0, 1e-15);
  EXPECT_EQ(g.interior[2], 0.0);
}

TEST(RelativeError, ReferenceExamples) {
  const std::vector<Complex> ref{Complex(1, 2), Complex(-3, 0.5), Complex(0.25, -1)};
  std::vector<Complex> zero(3), scaled;
  for (const auto& v : ref) scaled.push_back(1.1 * v);
  const RelativeError same = relative_error(ref, ref);
  EXPECT_EQ(same.real, 0.0);
  EXPECT_EQ(same.imag, 0.0);
  const RelativeError none = relative_error(zero, ref);
  EXPECT_NEAR(none.real, 1.0, 1e-15);
  EXPECT_NEAR(none.imag, 1.0, 1e-15);
  const RelativeError ten = relative_error(scaled, ref);
  EXPECT_NEAR(ten.real, 0.1, 1e-14);
  EXPECT_NEAR(ten.imag, 0.1, 1e-14);
  EXPECT_THROW(relative_error(ref, zero), ContractViolation);
  EXPECT_THROW(relative_error(std::vector<Complex>(2), ref), ContractViolation);
}

}  // namespace
}  // namespace wgpinn
