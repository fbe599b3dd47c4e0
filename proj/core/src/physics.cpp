#include "wgpinn/physics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wgpinn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI(0.0, 1.0);

ComplexJet make_jet(Complex v, Complex dx, Complex dz, Complex dxx, Complex dzz) {
  return {{v.real(), dx.real(), dz.real(), dxx.real(), dzz.real()},
          {v.imag(), dx.imag(), dz.imag(), dxx.imag(), dzz.imag()}};
}

Complex dx_of(const ComplexJet& j) { return {j.re.dx, j.im.dx}; }
Complex dz_of(const ComplexJet& j) { return {j.re.dz, j.im.dz}; }
Complex laplacian_of(const ComplexJet& j) {
  return {j.re.dxx + j.re.dzz, j.im.dxx + j.im.dzz};
}

RealJet add(const RealJet& a, const RealJet& b, double sign) {
  return {a.v + sign * b.v, a.dx + sign * b.dx, a.dz + sign * b.dz, a.dxx + sign * b.dxx,
          a.dzz + sign * b.dzz};
}

}  // namespace

std::string to_string(Formulation f) {
  return f == Formulation::kClassical ? "classical" : "taper";
}

Formulation parse_formulation(const std::string& name) {
  if (name == "classical") return Formulation::kClassical;
  if (name == "taper") return Formulation::kTaper;
  throw ContractViolation("unknown formulation '" + name + "' (expected classical or taper)");
}

std::string to_string(BoundaryId id) {
  switch (id) {
    case BoundaryId::kBottom: return "bottom";
    case BoundaryId::kTop: return "top";
    case BoundaryId::kMinus: return "minus";
    case BoundaryId::kPlus: return "plus";
  }
  throw ContractViolation("unknown boundary id");
}

void ProblemSpec::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw ContractViolation("problem: k must be positive");
  if (!(b > 0.0) || !std::isfinite(b)) throw ContractViolation("problem: b must be positive");
  if (n_modes < 1) throw ContractViolation("problem: n_modes must be >= 1");
  // The DtN map is undefined at the cut-off wave numbers k = nπ.
  const double n = std::round(k / kPi);
  if (n >= 1.0 && std::abs(k * k - n * n * kPi * kPi) <= 1e-9 * k * k) {
    throw ContractViolation("problem: k = " + std::to_string(k) + " is the cut-off of mode " +
                            std::to_string(static_cast<long>(n)) +
                            " (k² = n²π²); the DtN operator is undefined");
  }
}

TaperValue taper(const ProblemSpec& spec, double x) {
  if (x >= 0.0) return {};
  const TaperPolynomial& c = spec.taper;
  const double s = x / spec.b;
  const double b = spec.b;
  TaperValue t;
  t.value = ((c.c5 * s + c.c4) * s + c.c3) * s * s * s;
  t.d1 = ((5.0 * c.c5 * s + 4.0 * c.c4) * s + 3.0 * c.c3) * s * s / b;
  t.d2 = ((20.0 * c.c5 * s + 12.0 * c.c4) * s + 6.0 * c.c3) * s / (b * b);
  return t;
}

Complex longitudinal_frequency(double k, int n) {
  const double mu2 = static_cast<double>(n) * n * kPi * kPi;
  const double k2 = k * k;
  if (k2 > mu2) return {std::sqrt(k2 - mu2), 0.0};
  return {0.0, std::sqrt(mu2 - k2)};
}

double mode_shape(int n, double z) { return std::numbers::sqrt2 * std::sin(n * kPi * z); }

DtNContext::DtNContext(const ProblemSpec& spec, std::size_t n_nodes)
    : k_(spec.k), n_modes_(spec.n_modes) {
  spec.validate();
  if (n_nodes < 1) throw ContractViolation("DtN: need at least one quadrature node");
  const double h = 1.0 / static_cast<double>(n_nodes + 1);
  for (std::size_t j = 1; j <= n_nodes; ++j) {
    nodes_.push_back(static_cast<double>(j) * h);
    weights_.push_back(h);
  }
  for (int n = 1; n <= n_modes_; ++n) lambdas_.push_back(longitudinal_frequency(k_, n));

  const auto size = static_cast<Index>(n_nodes);
  m_re_ = Matrix::Zero(size, size);
  m_im_ = Matrix::Zero(size, size);
  for (int n = 1; n <= n_modes_; ++n) {
    Vector phi(size);
    for (Index j = 0; j < size; ++j) phi[j] = mode_shape(n, nodes_[static_cast<std::size_t>(j)]);
    const Matrix projector = h * phi * phi.transpose();
    const Complex m = multiplier(n);
    m_re_ += m.real() * projector;
    m_im_ += m.imag() * projector;
  }
}

bool DtNContext::propagating(int n) const {
  return k_ * k_ > static_cast<double>(n) * n * kPi * kPi;
}

Complex DtNContext::project(int n, std::span<const Complex> trace) const {
  if (trace.size() != nodes_.size()) throw ContractViolation("DtN: trace/node count mismatch");
  Complex acc(0.0, 0.0);
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    acc += weights_[j] * mode_shape(n, nodes_[j]) * trace[j];
  }
  return acc;
}

std::vector<Complex> DtNContext::apply(std::span<const Complex> trace) const {
  if (trace.size() != nodes_.size()) throw ContractViolation("DtN: trace/node count mismatch");
  std::vector<Complex> out(nodes_.size(), Complex(0.0, 0.0));
  for (int n = 1; n <= n_modes_; ++n) {
    const Complex coeff = multiplier(n) * project(n, trace);
    for (std::size_t j = 0; j < nodes_.size(); ++j) out[j] += coeff * mode_shape(n, nodes_[j]);
  }
  return out;
}

ComplexJet incoming_wave(const ProblemSpec& spec, double x, double z) {
  if (!(spec.k * spec.k > kPi * kPi)) {
    throw ContractViolation("incoming_wave: mode 1 is evanescent for k = " + std::to_string(spec.k));
  }
  const double lambda = std::sqrt(spec.k * spec.k - kPi * kPi);
  // φ_1(z)/√2 = sin(πz)
  const Complex phase = std::exp(kI * (lambda * (x + spec.b)));
  const Complex v = phase * std::sin(kPi * z);
  const Complex vz = phase * (kPi * std::cos(kPi * z));
  return make_jet(v, kI * lambda * v, vz, -lambda * lambda * v, -kPi * kPi * v);
}

Complex reference_solution(const ProblemSpec& spec, double x, double z) {
  return jet_value(incoming_wave(spec, x, z));
}

Complex jet_value(const ComplexJet& j) { return {j.re.v, j.im.v}; }

ComplexJet multiply_by_profile(const ComplexJet& u, const TaperValue& g) {
  auto one = [&g](const RealJet& r) {
    return RealJet{g.value * r.v, g.d1 * r.v + g.value * r.dx, g.value * r.dz,
                   g.d2 * r.v + 2.0 * g.d1 * r.dx + g.value * r.dxx, g.value * r.dzz};
  };
  return {one(u.re), one(u.im)};
}

ComplexJet operator+(const ComplexJet& a, const ComplexJet& b) {
  return {add(a.re, b.re, 1.0), add(a.im, b.im, 1.0)};
}

ComplexJet operator-(const ComplexJet& a, const ComplexJet& b) {
  return {add(a.re, b.re, -1.0), add(a.im, b.im, -1.0)};
}

Complex pde_rhs(const ProblemSpec& spec, double x, double z) {
  if (spec.formulation == Formulation::kClassical) return {0.0, 0.0};
  const TaperValue chi = taper(spec, x);
  if (chi.d1 == 0.0 && chi.d2 == 0.0) return {0.0, 0.0};
  const ComplexJet inc = incoming_wave(spec, x, z);
  return -2.0 * dx_of(inc) * chi.d1 - jet_value(inc) * chi.d2;
}

Complex pde_residual(const ProblemSpec& spec, const ComplexJet& jet, double x, double z) {
  return laplacian_of(jet) + spec.k * spec.k * jet_value(jet) - pde_rhs(spec, x, z);
}

BoundarySample make_boundary_sample(const ProblemSpec& spec, BoundaryId which, double x, double z) {
  const double tol = 1e-12 * std::max(1.0, spec.b);
  auto require = [&](bool ok) {
    if (!ok) {
      throw ContractViolation("boundary sample (" + std::to_string(x) + ", " + std::to_string(z) +
                              ") is not on edge " + to_string(which));
    }
  };
  BoundarySample s{which, x, z, 0.0, 0.0};
  switch (which) {
    case BoundaryId::kBottom:
      require(std::abs(z) <= tol && x >= -spec.b - tol && x <= spec.b + tol);
      s.nz = -1.0;
      break;
    case BoundaryId::kTop:
      require(std::abs(z - 1.0) <= tol && x >= -spec.b - tol && x <= spec.b + tol);
      s.nz = 1.0;
      break;
    // The walls own the corners.
    case BoundaryId::kMinus:
      require(std::abs(x + spec.b) <= tol && z > 0.0 && z < 1.0);
      s.nx = -1.0;
      break;
    case BoundaryId::kPlus:
      require(std::abs(x - spec.b) <= tol && z > 0.0 && z < 1.0);
      s.nx = 1.0;
      break;
  }
  return s;
}

std::vector<Complex> boundary_residual(const ProblemSpec& spec, const DtNContext& ctx,
                                       std::span<const BoundarySample> samples,
                                       std::span<const ComplexJet> jets) {
  if (samples.size() != jets.size()) throw ContractViolation("boundary_residual: size mismatch");
  if (samples.empty()) return {};
  const BoundaryId which = samples.front().which;
  const int id = static_cast<int>(which);
  if (id < 0 || id >= kBoundaryCount) throw ContractViolation("boundary_residual: unknown boundary");
  for (const auto& s : samples) {
    if (s.which != which) throw ContractViolation("boundary_residual: mixed boundary ids");
  }
  const bool taper_form = spec.formulation == Formulation::kTaper;
  std::vector<Complex> res(samples.size());

  if (which == BoundaryId::kBottom || which == BoundaryId::kTop) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      res[i] = jet_value(jets[i]);
      if (taper_form) {
        const auto& s = samples[i];
        res[i] += jet_value(incoming_wave(spec, s.x, s.z)) * taper(spec, s.x).value;
      }
    }
    return res;
  }

  if (samples.size() != ctx.node_count()) {
    throw ContractViolation("boundary_residual: interface samples must match the DtN nodes");
  }
  std::vector<Complex> trace(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].z - ctx.nodes()[i]) > 1e-12) {
      throw ContractViolation("boundary_residual: interface sample is not a DtN node");
    }
    trace[i] = jet_value(jets[i]);
  }
  const std::vector<Complex> dtn = ctx.apply(trace);
  std::vector<Complex> dtn_inc;
  if (!taper_form && which == BoundaryId::kMinus) {
    std::vector<Complex> inc(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      inc[i] = reference_solution(spec, samples[i].x, samples[i].z);
    }
    dtn_inc = ctx.apply(inc);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Complex normal_derivative = s.nx * dx_of(jets[i]) + s.nz * dz_of(jets[i]);
    res[i] = normal_derivative - dtn[i];
    if (!dtn_inc.empty()) res[i] += 2.0 * dtn_inc[i];
  }
  return res;
}

}  // namespace wgpinn
