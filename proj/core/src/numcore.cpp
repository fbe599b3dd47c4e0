#include "wgpinn/numcore.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wgpinn {

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw ContractViolation("matvec: matrix has " + std::to_string(m.cols()) +
                            " columns but vector has length " + std::to_string(v.size()));
  }
  return m * v;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  // 1 - u lies in (0, 1], so the logarithm is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector sample_uniform(SeededRng& rng, double lo, double hi, std::size_t n) {
  if (!(lo < hi)) {
    throw ContractViolation("sample_uniform: need lo < hi");
  }
  if (n == 0) {
    throw ContractViolation("sample_uniform: need n >= 1");
  }
  Vector out(static_cast<Index>(n));
  const double width = hi - lo;
  for (Index i = 0; i < out.size(); ++i) {
    double x = lo + width * rng.uniform();
    // Rounding can land exactly on hi when lo != 0.
    if (x >= hi) x = std::nextafter(hi, lo);
    out[i] = x;
  }
  return out;
}

Matrix glorot_normal(SeededRng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) {
    throw ContractViolation("glorot_normal: fans must be >= 1");
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(static_cast<Index>(fan_out), static_cast<Index>(fan_in));
  for (Index r = 0; r < w.rows(); ++r) {
    for (Index c = 0; c < w.cols(); ++c) {
      w(r, c) = stddev * rng.normal();
    }
  }
  return w;
}

}  // namespace wgpinn
