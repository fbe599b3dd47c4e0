#include "wgpinn/trainer.hpp"

#include <cmath>
#include <string>

namespace wgpinn {

AdamState::AdamState(Index size, AdamHyper hyper)
    : hyper_(hyper), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

Vector AdamState::step(const Vector& params, const Vector& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ContractViolation("adam: parameter/gradient size mismatch");
  }
  if (!grad.allFinite()) {
    throw NumericFailure("adam: non-finite gradient at step " + std::to_string(t_));
  }
  ++t_;
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const Vector m_hat = m_ / c1;
  const Vector v_hat = v_ / c2;
  return params - lr * (m_hat.array() / (v_hat.array().sqrt() + hyper_.epsilon)).matrix();
}

Vector adam_step(AdamState& state, const Vector& params, const Vector& grad, double lr) {
  return state.step(params, grad, lr);
}

double LrSchedule::at(std::uint64_t step) const {
  double exponent = static_cast<double>(step) / decay_steps;
  if (staircase) exponent = std::floor(exponent);
  return lr0 * std::pow(decay_rate, exponent);
}

void TrainConfig::validate() const {
  problem.validate();
  if (hidden_layers < 1 || width < 1) throw ContractViolation("config: network needs a hidden layer");
  if (grid_x < 2 || grid_z < 2 || n_b < 2) throw ContractViolation("config: grids must be >= 2");
  if (eval_every < 1) throw ContractViolation("config: eval_every must be >= 1");
  if (!(lr.lr0 > 0.0) || !(lr.decay_rate > 0.0) || !(lr.decay_steps > 0.0) ||
      !std::isfinite(lr.lr0) || !std::isfinite(lr.decay_rate) || !std::isfinite(lr.decay_steps)) {
    throw ContractViolation("config: learning-rate schedule must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0)) {
    throw ContractViolation("config: Adam hyperparameters out of range");
  }
  if (eval_grid.nx < 1 || eval_grid.nz < 1) throw ContractViolation("config: empty evaluation grid");
}

std::vector<Complex> evaluate_field(const NetworkParams& params, const ProblemSpec& spec,
                                    const Matrix& points) {
  const Matrix u = forward_batch(params, points);
  std::vector<Complex> field(static_cast<std::size_t>(points.cols()));
  for (Index i = 0; i < points.cols(); ++i) {
    Complex v(u(0, i), u(1, i));
    if (spec.formulation == Formulation::kTaper) {
      const double chi = taper(spec, points(0, i)).value;
      if (chi != 0.0) v += chi * reference_solution(spec, points(0, i), points(1, i));
    }
    field[static_cast<std::size_t>(i)] = v;
  }
  return field;
}

RelativeError field_error(const NetworkParams& params, const ProblemSpec& spec,
                          const Matrix& points) {
  const std::vector<Complex> field = evaluate_field(params, spec, points);
  std::vector<Complex> ref(field.size());
  for (Index i = 0; i < points.cols(); ++i) {
    ref[static_cast<std::size_t>(i)] = reference_solution(spec, points(0, i), points(1, i));
  }
  return relative_error(field, ref);
}

TrainResult train(const TrainConfig& cfg, const TraceSink& sink) {
  cfg.validate();
  const ProblemSpec& spec = cfg.problem;
  SeededRng rng(cfg.seed);

  const TrainingSet ts = build_training_set(spec, cfg.grid_x, cfg.grid_z, cfg.n_b);
  const DtNContext ctx(spec, cfg.n_b);
  const LossAssembler assembler(spec, ts, ctx);
  const Matrix eval_points = cell_center_grid(spec, cfg.eval_grid.nx, cfg.eval_grid.nz);

  TrainResult result;
  result.params = init_params(rng, make_layer_sizes(cfg.hidden_layers, cfg.width), cfg.alpha0);
  result.initial_params = result.params;
  result.sa = init_sa_weights(rng, ts);

  Vector theta = result.params.flatten();
  Vector lambda = result.sa.flatten();
  AdamState theta_opt(theta.size(), cfg.adam);
  AdamState lambda_opt(lambda.size(), cfg.adam);

  for (std::uint64_t step = 0;; ++step) {
    try {
      const bool last = step == cfg.total_steps;
      const LossEvaluation eval = assembler.evaluate(result.params, result.sa, !last);
      result.final_loss = eval.report;
      if (step % cfg.eval_every == 0 || last) {
        TraceRecord rec{step, cfg.lr.at(step), eval.report,
                        field_error(result.params, spec, eval_points)};
        result.trace.records.push_back(rec);
        if (sink) sink(rec);
      }
      if (last) break;

      const double lr = cfg.lr.at(step);
      theta = theta_opt.step(theta, eval.grad.flatten(), lr);
      // Ascent on λ: descend on −∂L/∂λ.
      lambda = lambda_opt.step(lambda, -eval.sa_grad.flatten(), lr);
      result.params.unflatten(theta);
      result.sa.unflatten(lambda);
      result.steps_done = step + 1;
    } catch (const NumericFailure& e) {
      result.failed = true;
      result.failure = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }

  try {
    result.final_error = field_error(result.params, spec, eval_points);
    result.final_train_error = field_error(result.params, spec, ts.interior);
  } catch (const NumericFailure& e) {
    if (!result.failed) {
      result.failed = true;
      result.failure = e.what();
    }
  }
  return result;
}

}  // namespace wgpinn
