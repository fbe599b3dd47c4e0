#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wgpinn/lossbuilder.hpp"
#include "wgpinn/network.hpp"
#include "wgpinn/physics.hpp"

namespace wgpinn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for one flat parameter vector.
class AdamState {
 public:
  AdamState(Index size, AdamHyper hyper);

  /// One descent step; returns the updated parameters. Throws NumericFailure
  /// (naming the step) if the gradient is not finite.
  Vector step(const Vector& params, const Vector& grad, double lr);

  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }
  std::uint64_t steps_taken() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  AdamHyper hyper_;
  Vector m_;
  Vector v_;
  std::uint64_t t_ = 0;
};

Vector adam_step(AdamState& state, const Vector& params, const Vector& grad, double lr);

/// lr(t) = lr0 · rate^(t / decay_steps); with staircase the exponent is floored.
struct LrSchedule {
  double lr0 = 5e-3;
  double decay_rate = 0.95;
  double decay_steps = 1000.0;
  bool staircase = false;

  double at(std::uint64_t step) const;
};

struct GridShape {
  std::size_t nx = 240;
  std::size_t nz = 20;
};

struct TrainConfig {
  ProblemSpec problem;
  std::size_t hidden_layers = 10;
  std::size_t width = 45;
  double alpha0 = 2.0;
  std::size_t grid_x = 120;
  std::size_t grid_z = 10;
  std::size_t n_b = 80;
  std::uint64_t total_steps = 50000;
  std::uint64_t eval_every = 100;
  std::uint64_t seed = 11;
  LrSchedule lr;
  AdamHyper adam;
  GridShape eval_grid;

  void validate() const;
};

struct TraceRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  LossReport loss;
  RelativeError error;  // on the evaluation grid
};

struct TrainTrace {
  std::vector<TraceRecord> records;
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct TrainResult {
  NetworkParams initial_params;
  NetworkParams params;
  SelfAdaptiveWeights sa;
  TrainTrace trace;
  bool failed = false;
  std::string failure;
  std::uint64_t steps_done = 0;
  LossReport final_loss;
  RelativeError final_error;        // evaluation grid
  RelativeError final_train_error;  // interior training grid
};

/// Reconstructed field: u_θ for the classical problem, u_θ + χu_inc for the
/// taper problem, at the columns of a 2 × P point matrix.
std::vector<Complex> evaluate_field(const NetworkParams& params, const ProblemSpec& spec,
                                    const Matrix& points);

/// Relative error of the reconstructed field against the incoming wave.
RelativeError field_error(const NetworkParams& params, const ProblemSpec& spec,
                          const Matrix& points);

/// Saddle-point training: Adam descent on θ and simultaneous Adam ascent on
/// the self-adaptive weights, each with its own moments. Record s of the
/// trace describes the state after s updates, for s = 0, eval_every, ... up
/// to total_steps. A numeric failure stops the run and is reported in the
/// result, with the trace up to that point intact.
TrainResult train(const TrainConfig& cfg, const TraceSink& sink = {});

}  // namespace wgpinn
