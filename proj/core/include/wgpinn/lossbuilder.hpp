#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "wgpinn/gradengine.hpp"
#include "wgpinn/network.hpp"
#include "wgpinn/physics.hpp"

namespace wgpinn {

/// Collocation points, each set stored as a 2 × N matrix (row 0: x, row 1: z).
///
/// Interior: cell centres of a grid_x × grid_z partition of Ω, x-major.
/// Walls (bottom z = 0, top z = 1): n_b uniform x-nodes including the corners.
/// Interfaces (x = ∓b): the n_b DtN nodes z_j = j / (n_b + 1).
struct TrainingSet {
  Matrix interior;
  std::array<Matrix, kBoundaryCount> boundary;

  const Matrix& edge(BoundaryId id) const { return boundary[static_cast<std::size_t>(id)]; }
  Index interior_count() const { return interior.cols(); }
  Index boundary_count(BoundaryId id) const { return edge(id).cols(); }
};

/// Cell centres of an nx × nz partition of Ω, x-major.
Matrix cell_center_grid(const ProblemSpec& spec, std::size_t nx, std::size_t nz);

TrainingSet build_training_set(const ProblemSpec& spec, std::size_t grid_x, std::size_t grid_z,
                               std::size_t n_b);

/// One trainable weight per collocation point.
struct SelfAdaptiveWeights {
  Vector interior;
  std::array<Vector, kBoundaryCount> boundary;

  const Vector& edge(BoundaryId id) const { return boundary[static_cast<std::size_t>(id)]; }
  Vector& edge(BoundaryId id) { return boundary[static_cast<std::size_t>(id)]; }

  Index size() const;
  /// interior first, then bottom, top, minus, plus.
  Vector flatten() const;
  void unflatten(const Vector& flat);
};

/// λ_r ~ U(0, 0.5), walls ~ U(0, 30), interfaces ~ U(0, 10), drawn in that order.
SelfAdaptiveWeights init_sa_weights(SeededRng& rng, const TrainingSet& ts);

/// Self-adaptive mask m(λ) = λ².
inline double mask(double lambda) { return lambda * lambda; }
inline double mask_derivative(double lambda) { return 2.0 * lambda; }

struct LossReport {
  double total = 0.0;
  double residual_term = 0.0;
  std::array<double, kBoundaryCount> boundary_terms{};
};

/// Complex residual at every collocation point, in TrainingSet order.
struct PointResiduals {
  std::vector<Complex> interior;
  std::array<std::vector<Complex>, kBoundaryCount> boundary;
};

/// (1/N) Σ m(λ_i) (Re r_i² + Im r_i²) per set, summed.
LossReport masked_report(const PointResiduals& residuals, const SelfAdaptiveWeights& sa);

/// ∂L/∂λ_i = (1/N) m'(λ_i) |r_i|².
SelfAdaptiveWeights sa_gradient(const PointResiduals& residuals, const SelfAdaptiveWeights& sa);

struct LossEvaluation {
  LossReport report;
  PointResiduals residuals;
  ParamGradient grad;          // empty unless requested
  SelfAdaptiveWeights sa_grad;  // empty unless requested
};

/// Self-adaptive PINN loss for one problem on one training set.
///
/// The constant parts (right-hand sides, wall data, the DtN matrices) are
/// assembled once; evaluate() records the network jets at all collocation
/// points on a single tape and builds every residual from them.
class LossAssembler {
 public:
  LossAssembler(const ProblemSpec& spec, const TrainingSet& ts, const DtNContext& ctx);

  LossEvaluation evaluate(const NetworkParams& params, const SelfAdaptiveWeights& sa,
                          bool with_gradient) const;

  /// Tape nodes of one recorded loss.
  struct Recorded {
    Var total;
    Var interior, interior_re, interior_im;
    std::array<Var, kBoundaryCount> edge, edge_re, edge_im;
  };

  /// Records the full loss for fixed self-adaptive weights onto a tape.
  Recorded record(Tape& tape, const ParamVars& vars, const SelfAdaptiveWeights& sa) const;

  /// The loss as a function of the network parameters alone.
  LossFn loss_fn(const SelfAdaptiveWeights& sa) const;

  const ProblemSpec& spec() const { return spec_; }
  const TrainingSet& training_set() const { return ts_; }

 private:
  using Shared = std::shared_ptr<const Matrix>;

  ProblemSpec spec_;
  TrainingSet ts_;
  Matrix all_points_;
  Index offset_interior_ = 0;
  std::array<Index, kBoundaryCount> offset_boundary_{};

  Shared rhs_re_, rhs_im_;                                // interior, taper only
  std::array<Shared, kBoundaryCount> data_re_, data_im_;  // boundary constants, may be null
  Shared dtn_re_t_, dtn_im_t_;                            // transposed, null when zero
};

LossReport total_loss(const NetworkParams& params, const SelfAdaptiveWeights& sa,
                      const TrainingSet& ts, const ProblemSpec& spec, const DtNContext& ctx);

struct RelativeError {
  double real = 0.0;
  double imag = 0.0;
};

/// ‖Re(u − u_ref)‖₂ / ‖Re u_ref‖₂ and the same for the imaginary parts.
RelativeError relative_error(std::span<const Complex> field, std::span<const Complex> ref);

}  // namespace wgpinn
