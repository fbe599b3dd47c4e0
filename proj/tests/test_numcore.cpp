#include <gtest/gtest.h>

#include <cmath>

#include "wgpinn/numcore.hpp"

namespace wgpinn {
namespace {

TEST(Matvec, IdentityAndZero) {
  Vector v(3);
  v << 1, 2, 3;
  EXPECT_EQ(matvec(Matrix::Identity(3, 3), v), v);
  Vector w(2);
  w << 5, 7;
  EXPECT_EQ(matvec(Matrix::Zero(2, 2), w), Vector::Zero(2));
}

TEST(Matvec, HandComputed) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const Vector out = matvec(m, Vector::Ones(2));
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 7.0);
}

TEST(Matvec, DimensionMismatchThrows) {
  EXPECT_THROW(matvec(Matrix::Zero(2, 3), Vector::Zero(2)), ContractViolation);
}

TEST(Matvec, LinearityOnRandomInstances) {
  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = glorot_normal(rng, 4, 3);
    const Vector u = sample_uniform(rng, -1, 1, 4);
    const Vector v = sample_uniform(rng, -1, 1, 4);
    const double a = rng.normal();
    const double b = rng.normal();
    const Vector lhs = matvec(m, a * u + b * v);
    const Vector rhs = a * matvec(m, u) + b * matvec(m, v);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST(SampleUniform, MeanOfLargeSample) {
  SeededRng rng(11);
  const Vector x = sample_uniform(rng, 0.0, 1.0, 10000);
  EXPECT_NEAR(x.mean(), 0.5, 0.02);
}

TEST(SampleUniform, RangeContainment) {
  SeededRng rng(5);
  const Vector x = sample_uniform(rng, 0.0, 0.5, 5000);
  EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_LT(x.maxCoeff(), 0.5);
  const Vector y = sample_uniform(rng, 3.0, 3.0 + 1e-15, 5000);
  EXPECT_GE(y.minCoeff(), 3.0);
  EXPECT_LT(y.maxCoeff(), 3.0 + 1e-15);
}

TEST(SampleUniform, Deterministic) {
  SeededRng a(42), b(42);
  EXPECT_EQ(sample_uniform(a, 0, 1, 100), sample_uniform(b, 0, 1, 100));
}

TEST(SampleUniform, BadArgumentsThrow) {
  SeededRng rng(1);
  EXPECT_THROW(sample_uniform(rng, 1.0, 1.0, 3), ContractViolation);
  EXPECT_THROW(sample_uniform(rng, 2.0, 1.0, 3), ContractViolation);
  EXPECT_THROW(sample_uniform(rng, 0.0, 1.0, 0), ContractViolation);
}

TEST(GlorotNormal, VarianceMatchesFans) {
  SeededRng rng(11);
  // 200 draws of a 100 × 100 matrix: 2e6 samples, target variance 0.01.
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const Matrix w = glorot_normal(rng, 100, 100);
    sum += w.sum();
    sum_sq += w.squaredNorm();
    n += static_cast<std::size_t>(w.size());
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  EXPECT_NEAR(var, 0.01, 0.01 * 0.2);
  EXPECT_NEAR(mean, 0.0, 1e-3);
}

TEST(GlorotNormal, UnitFansHaveUnitVariance) {
  SeededRng rng(7);
  double sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum_sq += std::pow(glorot_normal(rng, 1, 1)(0, 0), 2);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.05);
}

TEST(GlorotNormal, ShapeAndDeterminism) {
  SeededRng a(9), b(9);
  const Matrix wa = glorot_normal(a, 3, 5);
  EXPECT_EQ(wa.rows(), 5);
  EXPECT_EQ(wa.cols(), 3);
  EXPECT_EQ(wa, glorot_normal(b, 3, 5));
  EXPECT_THROW(glorot_normal(a, 0, 5), ContractViolation);
}

TEST(SeededRng, StreamIsFixedBySeed) {
  // mt19937_64's 10000th output for the default seed is pinned by the standard.
  std::mt19937_64 ref;
  SeededRng rng(std::mt19937_64::default_seed);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = rng.next_u64();
  ref.discard(9999);
  EXPECT_EQ(last, ref());
  EXPECT_EQ(last, 9981545732273789042ULL);
}

TEST(SeededRng, NormalMoments) {
  SeededRng rng(11);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

}  // namespace
}  // namespace wgpinn
