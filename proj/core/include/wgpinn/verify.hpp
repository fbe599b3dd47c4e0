#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wgpinn/physics.hpp"

namespace wgpinn {

/// Options for the built-in oracle suite run by `wgpinn verify`.
struct VerifyOptions {
  std::vector<double> ks = {8.0, 13.0, 16.0};
  double b = 2.0;
  TaperPolynomial taper;
  std::size_t n_b = 80;
  std::size_t n_random = 200;
  std::uint64_t seed = 11;
  double gradient_k = 8.0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// χ(−b) = 1, χ(0) = 0 and χ', χ'' vanish at both ends, to 1e-12.
CheckResult check_taper_endpoints(const ProblemSpec& spec);

/// Λφ_1 = ιλ_1φ_1 and, with one mode, Λφ_2 = 0 on n_b nodes, within 10 / n_b².
CheckResult check_dtn_eigenfunction(const ProblemSpec& spec, std::size_t n_b);

/// With u = u_inc: classical residuals of u and taper residuals of u − χu_inc
/// vanish (to 1e-9) at random interior and wall points and on the interface nodes.
CheckResult check_formulation_equivalence(const ProblemSpec& spec, std::size_t n_random,
                                          std::size_t n_b, std::uint64_t seed);

/// fd_check of the full self-adaptive loss on a 2 × 8 network with 16
/// interior and 4 × 4 boundary points; passes below 1e-4 at step 1e-6.
CheckResult check_loss_gradient(const ProblemSpec& spec, std::uint64_t seed);

VerifyReport run_verification(const VerifyOptions& options);

void print_report(std::ostream& out, const VerifyReport& report);

}  // namespace wgpinn
