#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "wgpinn/errors.hpp"

namespace wgpinn {

// All arithmetic is double precision. Second-derivative residuals lose too
// many digits in single precision for the gradient checks to mean anything.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Matrix-vector product with a dimension check.
Vector matvec(const Matrix& m, const Vector& v);

/// Deterministic pseudo-random source.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The std:: distributions are implementation-defined, so the
/// real-valued transforms are done here:
///   uniform(): top 53 bits of one draw, scaled to [0, 1).
///   normal():  Box–Muller cosine branch, two uniform draws per normal.
/// The result is a pure function of (seed, call index) on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1).
  double uniform();

  /// Standard normal N(0, 1).
  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// n independent draws from U(lo, hi); every value lies in [lo, hi).
Vector sample_uniform(SeededRng& rng, double lo, double hi, std::size_t n);

/// Glorot (Xavier) normal initializer: a fan_out × fan_in matrix with
/// entries ~ N(0, 2 / (fan_in + fan_out)), filled row by row.
Matrix glorot_normal(SeededRng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace wgpinn
