#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wgpinn/network.hpp"
#include "wgpinn/numcore.hpp"

namespace wgpinn {

using Complex = std::complex<double>;

enum class Formulation { kClassical, kTaper };

std::string to_string(Formulation f);
Formulation parse_formulation(const std::string& name);

/// χ(x) = c5·x⁵/b⁵ + c4·x⁴/b⁴ + c3·x³/b³ for x < 0, and 0 for x ≥ 0.
/// The default coefficients give χ(−b) = 1, χ(0) = 0 and vanishing first and
/// second derivatives at both ends.
struct TaperPolynomial {
  double c5 = -6.0;
  double c4 = -15.0;
  double c3 = -10.0;
};

/// Rectangular junction Ω = (−b, b) × (0, 1) with transparent interfaces at
/// x = ±b and walls at z = 0, 1.
struct ProblemSpec {
  double k = 8.0;
  double b = 2.0;
  Formulation formulation = Formulation::kTaper;
  int n_modes = 1;
  TaperPolynomial taper;

  /// k > 0, b > 0, n_modes ≥ 1 and k² ≠ n²π² for every n ≥ 1.
  void validate() const;
};

struct TaperValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

TaperValue taper(const ProblemSpec& spec, double x);

/// λ_n = √(k² − n²π²) when mode n propagates, ι√(n²π² − k²) otherwise.
Complex longitudinal_frequency(double k, int n);

/// φ_n(z) = √2 sin(nπz).
double mode_shape(int n, double z);

/// Truncated Dirichlet-to-Neumann map on x = ±b.
///
/// Traces live on the N uniform nodes z_j = j / (N + 1), j = 1..N. The inner
/// product (φ_n, w) is the composite trapezoid rule on the closed grid
/// {0, z_1, ..., z_N, 1}; the two end nodes drop out because φ_n vanishes on
/// the walls, leaving weight h = 1/(N + 1) at every interior node.
class DtNContext {
 public:
  DtNContext(const ProblemSpec& spec, std::size_t n_nodes);

  std::size_t node_count() const { return nodes_.size(); }
  int mode_count() const { return n_modes_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  Complex lambda(int n) const { return lambdas_.at(static_cast<std::size_t>(n - 1)); }
  /// ιλ_n: purely imaginary for propagating modes, real and negative for
  /// evanescent ones.
  Complex multiplier(int n) const { return Complex(0.0, 1.0) * lambda(n); }
  bool propagating(int n) const;

  /// (φ_n, w) by the quadrature above.
  Complex project(int n, std::span<const Complex> trace) const;

  /// Σ_n ιλ_n (φ_n, w) φ_n at the nodes.
  std::vector<Complex> apply(std::span<const Complex> trace) const;

  /// The map as a complex node-by-node matrix M = M_re + ι M_im with
  /// (Λw)_i = Σ_j M_ij w_j. Both parts are symmetric.
  const Matrix& matrix_real() const { return m_re_; }
  const Matrix& matrix_imag() const { return m_im_; }

 private:
  double k_;
  int n_modes_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<Complex> lambdas_;
  Matrix m_re_;
  Matrix m_im_;
};

/// u_inc(x, z) = e^{ι(x+b)λ_1} φ_1(z) / √2 with all its partials.
/// Requires k² > π².
ComplexJet incoming_wave(const ProblemSpec& spec, double x, double z);

/// The exact field for the straight junction: the incoming wave itself.
Complex reference_solution(const ProblemSpec& spec, double x, double z);

Complex jet_value(const ComplexJet& j);

/// Jet of g(x)·u for a function of x alone.
ComplexJet multiply_by_profile(const ComplexJet& u, const TaperValue& g);
ComplexJet operator+(const ComplexJet& a, const ComplexJet& b);
ComplexJet operator-(const ComplexJet& a, const ComplexJet& b);

/// Right-hand side of the Helmholtz equation: zero for the classical problem,
/// −2 ∂x u_inc χ' − u_inc χ'' for the taper problem.
Complex pde_rhs(const ProblemSpec& spec, double x, double z);

/// Δu + k²u − f at an interior point.
Complex pde_residual(const ProblemSpec& spec, const ComplexJet& jet, double x, double z);

enum class BoundaryId { kBottom = 0, kTop = 1, kMinus = 2, kPlus = 3 };
inline constexpr int kBoundaryCount = 4;

std::string to_string(BoundaryId id);

struct BoundarySample {
  BoundaryId which = BoundaryId::kBottom;
  double x = 0.0;
  double z = 0.0;
  double nx = 0.0;  // outward normal
  double nz = 0.0;
};

/// A point on the named edge with its outward normal. Throws if the point is
/// not on that edge.
BoundarySample make_boundary_sample(const ProblemSpec& spec, BoundaryId which, double x, double z);

/// Pointwise residual of the boundary condition on one edge.
///
/// Classical:   u                         on the walls
///              ∂_ν u − Λu + 2Λu_inc      on Γ−
///              ∂_ν u − Λu                on Γ+
/// Taper:       u + u_inc χ               on the walls
///              ∂_ν u − Λu                on Γ− and Γ+
///
/// On Γ± the samples must be the DtN nodes in order (the trace enters Λ).
std::vector<Complex> boundary_residual(const ProblemSpec& spec, const DtNContext& ctx,
                                       std::span<const BoundarySample> samples,
                                       std::span<const ComplexJet> jets);

}  // namespace wgpinn
