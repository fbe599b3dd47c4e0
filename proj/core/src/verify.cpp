#include "wgpinn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "wgpinn/gradengine.hpp"
#include "wgpinn/lossbuilder.hpp"

namespace wgpinn {

namespace {

std::string k_label(const ProblemSpec& spec) {
  std::ostringstream ss;
  ss << "k=" << spec.k;
  return ss.str();
}

template <typename Fn>
CheckResult guarded(std::string name, double threshold, Fn&& fn) {
  CheckResult r;
  r.name = std::move(name);
  r.threshold = threshold;
  try {
    r.measured = fn();
    r.passed = r.measured < threshold;
  } catch (const std::exception& e) {
    r.passed = false;
    r.measured = std::nan("");
    r.detail = e.what();
  }
  return r;
}

ProblemSpec with_formulation(ProblemSpec spec, Formulation f) {
  spec.formulation = f;
  return spec;
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

CheckResult check_taper_endpoints(const ProblemSpec& spec) {
  return guarded("taper endpoints " + k_label(spec), 1e-12, [&] {
    // Left end evaluated by the polynomial branch; right end by the limit x → 0⁻.
    const TaperValue left = taper(spec, -spec.b);
    const TaperValue right = taper(spec, std::nextafter(0.0, -1.0));
    const TaperValue zero = taper(spec, 0.0);
    double worst = std::abs(left.value - 1.0);
    for (double v : {left.d1, left.d2, right.value, right.d1, right.d2, zero.value, zero.d1, zero.d2}) {
      worst = std::max(worst, std::abs(v));
    }
    return worst;
  });
}

CheckResult check_dtn_eigenfunction(const ProblemSpec& spec, std::size_t n_b) {
  const double tol = 10.0 / static_cast<double>(n_b * n_b);
  return guarded("DtN eigenfunction " + k_label(spec), tol, [&] {
    ProblemSpec one_mode = spec;
    one_mode.n_modes = 1;
    const DtNContext ctx(one_mode, n_b);
    std::vector<Complex> phi1(n_b), phi2(n_b);
    for (std::size_t j = 0; j < n_b; ++j) {
      phi1[j] = mode_shape(1, ctx.nodes()[j]);
      phi2[j] = mode_shape(2, ctx.nodes()[j]);
    }
    const auto l1 = ctx.apply(phi1);
    const auto l2 = ctx.apply(phi2);
    double worst = 0.0;
    for (std::size_t j = 0; j < n_b; ++j) {
      worst = std::max(worst, std::abs(l1[j] - ctx.multiplier(1) * phi1[j]));
      worst = std::max(worst, std::abs(l2[j]));
    }
    return worst;
  });
}

CheckResult check_formulation_equivalence(const ProblemSpec& spec, std::size_t n_random,
                                          std::size_t n_b, std::uint64_t seed) {
  return guarded("formulation equivalence " + k_label(spec), 1e-9, [&] {
    const ProblemSpec classical = with_formulation(spec, Formulation::kClassical);
    const ProblemSpec tapered = with_formulation(spec, Formulation::kTaper);
    const DtNContext ctx(spec, n_b);
    SeededRng rng(seed);

    auto scattered = [&](double x, double z) {
      const ComplexJet inc = incoming_wave(spec, x, z);
      const TaperValue chi = taper(tapered, x);
      return multiply_by_profile(inc, {1.0 - chi.value, -chi.d1, -chi.d2});
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < n_random; ++i) {
      const double x = -spec.b + 2.0 * spec.b * rng.uniform();
      const double z = rng.uniform();
      worst = std::max(worst, std::abs(pde_residual(classical, incoming_wave(spec, x, z), x, z)));
      worst = std::max(worst, std::abs(pde_residual(tapered, scattered(x, z), x, z)));
    }

    auto edge = [&](const std::vector<BoundarySample>& samples) {
      std::vector<ComplexJet> u(samples.size()), u_sct(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        u[i] = incoming_wave(spec, samples[i].x, samples[i].z);
        u_sct[i] = scattered(samples[i].x, samples[i].z);
      }
      for (const Complex& r : boundary_residual(classical, ctx, samples, u)) {
        worst = std::max(worst, std::abs(r));
      }
      for (const Complex& r : boundary_residual(tapered, ctx, samples, u_sct)) {
        worst = std::max(worst, std::abs(r));
      }
    };

    for (BoundaryId wall : {BoundaryId::kBottom, BoundaryId::kTop}) {
      std::vector<BoundarySample> samples;
      const double z = wall == BoundaryId::kBottom ? 0.0 : 1.0;
      for (std::size_t i = 0; i < n_random / 2; ++i) {
        samples.push_back(make_boundary_sample(spec, wall, -spec.b + 2.0 * spec.b * rng.uniform(), z));
      }
      edge(samples);
    }
    for (BoundaryId side : {BoundaryId::kMinus, BoundaryId::kPlus}) {
      const double x = side == BoundaryId::kMinus ? -spec.b : spec.b;
      std::vector<BoundarySample> samples;
      for (double z : ctx.nodes()) samples.push_back(make_boundary_sample(spec, side, x, z));
      edge(samples);
    }
    return worst;
  });
}

CheckResult check_loss_gradient(const ProblemSpec& spec, std::uint64_t seed) {
  return guarded("loss gradient (" + to_string(spec.formulation) + ", " + k_label(spec) + ")", 1e-4,
                 [&] {
                   SeededRng rng(seed);
                   const NetworkParams params = init_params(rng, make_layer_sizes(2, 8), 2.0);
                   const TrainingSet ts = build_training_set(spec, 4, 4, 4);
                   const SelfAdaptiveWeights sa = init_sa_weights(rng, ts);
                   const DtNContext ctx(spec, 4);
                   const LossAssembler assembler(spec, ts, ctx);
                   return fd_check(params, assembler.loss_fn(sa), 20, 1e-6, seed);
                 });
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport report;
  for (double k : options.ks) {
    ProblemSpec spec;
    spec.k = k;
    spec.b = options.b;
    spec.taper = options.taper;
    auto validity = guarded("problem valid k=" + std::to_string(k), 0.5, [&] {
      spec.validate();
      return 0.0;
    });
    if (!validity.passed) {
      report.checks.push_back(std::move(validity));
      continue;
    }
    report.checks.push_back(check_taper_endpoints(spec));
    report.checks.push_back(check_dtn_eigenfunction(spec, options.n_b));
    report.checks.push_back(
        check_formulation_equivalence(spec, options.n_random, options.n_b, options.seed));
  }
  for (Formulation f : {Formulation::kClassical, Formulation::kTaper}) {
    ProblemSpec spec;
    spec.k = options.gradient_k;
    spec.b = options.b;
    spec.taper = options.taper;
    spec.formulation = f;
    report.checks.push_back(check_loss_gradient(spec, options.seed));
  }
  return report;
}

void print_report(std::ostream& out, const VerifyReport& report) {
  for (const CheckResult& c : report.checks) {
    char line[256];
    std::snprintf(line, sizeof(line), "[%s] %-44s measured %.3e  bound %.3e", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.measured, c.threshold);
    out << line;
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
  }
  out << (report.passed() ? "verify: all checks passed\n" : "verify: FAILED\n");
}

}  // namespace wgpinn
