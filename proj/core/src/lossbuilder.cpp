#include "wgpinn/lossbuilder.hpp"

#include <cmath>

namespace wgpinn {

namespace {

constexpr std::array<BoundaryId, kBoundaryCount> kEdges = {
    BoundaryId::kBottom, BoundaryId::kTop, BoundaryId::kMinus, BoundaryId::kPlus};

std::size_t slot(BoundaryId id) { return static_cast<std::size_t>(id); }

double masked_sum(const std::vector<Complex>& r, const Vector& lambda) {
  if (static_cast<Index>(r.size()) != lambda.size()) {
    throw ContractViolation("loss: residual count does not match weight count");
  }
  if (r.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double w = mask(lambda[static_cast<Index>(i)]);
    acc += w * (r[i].real() * r[i].real()) + w * (r[i].imag() * r[i].imag());
  }
  return acc / static_cast<double>(r.size());
}

Vector masked_gradient(const std::vector<Complex>& r, const Vector& lambda) {
  Vector g(lambda.size());
  const double inv_n = 1.0 / static_cast<double>(r.size());
  for (Index i = 0; i < lambda.size(); ++i) {
    g[i] = inv_n * mask_derivative(lambda[i]) * std::norm(r[static_cast<std::size_t>(i)]);
  }
  return g;
}

std::vector<Complex> to_complex(const Matrix& re, const Matrix& im) {
  std::vector<Complex> out(static_cast<std::size_t>(re.cols()));
  for (Index i = 0; i < re.cols(); ++i) out[static_cast<std::size_t>(i)] = {re(0, i), im(0, i)};
  return out;
}

}  // namespace

Matrix cell_center_grid(const ProblemSpec& spec, std::size_t nx, std::size_t nz) {
  if (nx < 1 || nz < 1) throw ContractViolation("grid: need at least one cell per direction");
  Matrix pts(2, static_cast<Index>(nx * nz));
  const double hx = 2.0 * spec.b / static_cast<double>(nx);
  const double hz = 1.0 / static_cast<double>(nz);
  Index c = 0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      pts(0, c) = -spec.b + (static_cast<double>(i) + 0.5) * hx;
      pts(1, c) = (static_cast<double>(j) + 0.5) * hz;
      ++c;
    }
  }
  return pts;
}

TrainingSet build_training_set(const ProblemSpec& spec, std::size_t grid_x, std::size_t grid_z,
                               std::size_t n_b) {
  if (grid_x < 2 || grid_z < 2 || n_b < 2) {
    throw ContractViolation("training set: grid_x, grid_z and n_b must be >= 2");
  }
  TrainingSet ts;
  ts.interior = cell_center_grid(spec, grid_x, grid_z);

  const auto n = static_cast<Index>(n_b);
  Matrix bottom(2, n), top(2, n), minus(2, n), plus(2, n);
  for (Index j = 0; j < n; ++j) {
    const double x = -spec.b + 2.0 * spec.b * static_cast<double>(j) / static_cast<double>(n - 1);
    const double z = static_cast<double>(j + 1) / static_cast<double>(n + 1);
    bottom.col(j) << x, 0.0;
    top.col(j) << x, 1.0;
    minus.col(j) << -spec.b, z;
    plus.col(j) << spec.b, z;
  }
  // Pin the wall end points exactly onto the corners.
  bottom(0, n - 1) = top(0, n - 1) = spec.b;
  ts.boundary = {bottom, top, minus, plus};
  return ts;
}

Index SelfAdaptiveWeights::size() const {
  Index n = interior.size();
  for (const auto& b : boundary) n += b.size();
  return n;
}

Vector SelfAdaptiveWeights::flatten() const {
  Vector flat(size());
  Index k = 0;
  flat.segment(k, interior.size()) = interior;
  k += interior.size();
  for (const auto& b : boundary) {
    flat.segment(k, b.size()) = b;
    k += b.size();
  }
  return flat;
}

void SelfAdaptiveWeights::unflatten(const Vector& flat) {
  if (flat.size() != size()) throw ContractViolation("sa weights: flat vector has the wrong length");
  Index k = 0;
  interior = flat.segment(k, interior.size());
  k += interior.size();
  for (auto& b : boundary) {
    b = flat.segment(k, b.size());
    k += b.size();
  }
}

SelfAdaptiveWeights init_sa_weights(SeededRng& rng, const TrainingSet& ts) {
  SelfAdaptiveWeights sa;
  sa.interior = sample_uniform(rng, 0.0, 0.5, static_cast<std::size_t>(ts.interior_count()));
  for (BoundaryId id : kEdges) {
    const bool wall = id == BoundaryId::kBottom || id == BoundaryId::kTop;
    sa.edge(id) = sample_uniform(rng, 0.0, wall ? 30.0 : 10.0,
                                 static_cast<std::size_t>(ts.boundary_count(id)));
  }
  return sa;
}

LossReport masked_report(const PointResiduals& residuals, const SelfAdaptiveWeights& sa) {
  LossReport rep;
  rep.residual_term = masked_sum(residuals.interior, sa.interior);
  rep.total = rep.residual_term;
  for (std::size_t j = 0; j < kBoundaryCount; ++j) {
    rep.boundary_terms[j] = masked_sum(residuals.boundary[j], sa.boundary[j]);
    rep.total += rep.boundary_terms[j];
  }
  return rep;
}

SelfAdaptiveWeights sa_gradient(const PointResiduals& residuals, const SelfAdaptiveWeights& sa) {
  SelfAdaptiveWeights g;
  g.interior = masked_gradient(residuals.interior, sa.interior);
  for (std::size_t j = 0; j < kBoundaryCount; ++j) {
    g.boundary[j] = masked_gradient(residuals.boundary[j], sa.boundary[j]);
  }
  return g;
}

LossAssembler::LossAssembler(const ProblemSpec& spec, const TrainingSet& ts, const DtNContext& ctx)
    : spec_(spec), ts_(ts) {
  spec_.validate();
  const auto n_minus = static_cast<std::size_t>(ts.boundary_count(BoundaryId::kMinus));
  const auto n_plus = static_cast<std::size_t>(ts.boundary_count(BoundaryId::kPlus));
  if (ctx.node_count() != n_minus || ctx.node_count() != n_plus) {
    throw ContractViolation("loss: DtN node count does not match the interface point count");
  }

  Index total = ts.interior_count();
  for (BoundaryId id : kEdges) total += ts.boundary_count(id);
  all_points_.resize(2, total);
  Index offset = 0;
  offset_interior_ = offset;
  all_points_.middleCols(offset, ts.interior_count()) = ts.interior;
  offset += ts.interior_count();
  for (BoundaryId id : kEdges) {
    offset_boundary_[slot(id)] = offset;
    all_points_.middleCols(offset, ts.boundary_count(id)) = ts.edge(id);
    offset += ts.boundary_count(id);
  }

  const bool taper_form = spec_.formulation == Formulation::kTaper;
  if (taper_form) {
    Matrix re(1, ts.interior_count()), im(1, ts.interior_count());
    for (Index i = 0; i < ts.interior_count(); ++i) {
      const Complex f = pde_rhs(spec_, ts.interior(0, i), ts.interior(1, i));
      re(0, i) = -f.real();
      im(0, i) = -f.imag();
    }
    rhs_re_ = std::make_shared<const Matrix>(std::move(re));
    rhs_im_ = std::make_shared<const Matrix>(std::move(im));

    // Walls: u_sct + u_inc χ = 0.
    for (BoundaryId id : {BoundaryId::kBottom, BoundaryId::kTop}) {
      const Matrix& pts = ts.edge(id);
      Matrix cre(1, pts.cols()), cim(1, pts.cols());
      for (Index i = 0; i < pts.cols(); ++i) {
        const Complex c = reference_solution(spec_, pts(0, i), pts(1, i)) *
                          taper(spec_, pts(0, i)).value;
        cre(0, i) = c.real();
        cim(0, i) = c.imag();
      }
      data_re_[slot(id)] = std::make_shared<const Matrix>(std::move(cre));
      data_im_[slot(id)] = std::make_shared<const Matrix>(std::move(cim));
    }
  } else {
    // Γ−: ∂_ν u − Λu + 2Λu_inc = 0.
    const Matrix& pts = ts.edge(BoundaryId::kMinus);
    std::vector<Complex> inc(static_cast<std::size_t>(pts.cols()));
    for (Index i = 0; i < pts.cols(); ++i) {
      inc[static_cast<std::size_t>(i)] = reference_solution(spec_, pts(0, i), pts(1, i));
    }
    const std::vector<Complex> dtn_inc = ctx.apply(inc);
    Matrix cre(1, pts.cols()), cim(1, pts.cols());
    for (Index i = 0; i < pts.cols(); ++i) {
      cre(0, i) = 2.0 * dtn_inc[static_cast<std::size_t>(i)].real();
      cim(0, i) = 2.0 * dtn_inc[static_cast<std::size_t>(i)].imag();
    }
    data_re_[slot(BoundaryId::kMinus)] = std::make_shared<const Matrix>(std::move(cre));
    data_im_[slot(BoundaryId::kMinus)] = std::make_shared<const Matrix>(std::move(cim));
  }

  if (!ctx.matrix_real().isZero(0.0)) {
    dtn_re_t_ = std::make_shared<const Matrix>(ctx.matrix_real().transpose());
  }
  if (!ctx.matrix_imag().isZero(0.0)) {
    dtn_im_t_ = std::make_shared<const Matrix>(ctx.matrix_imag().transpose());
  }
}

LossAssembler::Recorded LossAssembler::record(Tape& tape, const ParamVars& vars,
                                              const SelfAdaptiveWeights& sa) const {
  if (sa.interior.size() != ts_.interior_count()) {
    throw ContractViolation("loss: interior weight count does not match the training set");
  }
  for (BoundaryId id : kEdges) {
    if (sa.edge(id).size() != ts_.boundary_count(id)) {
      throw ContractViolation("loss: boundary weight count does not match edge " + to_string(id));
    }
  }

  const Var jet = record_jet_network(tape, vars, all_points_);
  const Index p = all_points_.cols();

  auto component = [&](Index row, JetBlock block, Index offset, Index count) {
    return tape.slice(jet, row, block * p + offset, 1, count);
  };
  auto masked = [&tape](Var re, Var im, const Vector& lambda) {
    Matrix w(1, lambda.size());
    const double inv_n = 1.0 / static_cast<double>(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i) w(0, i) = mask(lambda[i]) * inv_n;
    const auto shared = std::make_shared<const Matrix>(std::move(w));
    return tape.add(tape.weighted_square_sum(re, shared), tape.weighted_square_sum(im, shared));
  };

  Recorded rec;

  // Interior: Δu + k²u − f.
  const double k2 = spec_.k * spec_.k;
  const Index n_r = ts_.interior_count();
  std::array<Var, 2> interior_res;
  for (Index row = 0; row < 2; ++row) {
    Var lap = tape.add(component(row, kDxx, offset_interior_, n_r),
                       component(row, kDzz, offset_interior_, n_r));
    Var r = tape.add(lap, tape.scale(component(row, kValue, offset_interior_, n_r), k2));
    if (rhs_re_) r = tape.add_const(r, row == 0 ? rhs_re_ : rhs_im_);
    interior_res[static_cast<std::size_t>(row)] = r;
  }
  rec.interior_re = interior_res[0];
  rec.interior_im = interior_res[1];
  rec.interior = masked(rec.interior_re, rec.interior_im, sa.interior);

  for (BoundaryId id : kEdges) {
    const std::size_t s = slot(id);
    const Index off = offset_boundary_[s];
    const Index n = ts_.boundary_count(id);
    Var re, im;
    if (id == BoundaryId::kBottom || id == BoundaryId::kTop) {
      re = component(0, kValue, off, n);
      im = component(1, kValue, off, n);
    } else {
      const double sign = id == BoundaryId::kMinus ? -1.0 : 1.0;
      const Var v_re = component(0, kValue, off, n);
      const Var v_im = component(1, kValue, off, n);
      re = tape.scale(component(0, kDx, off, n), sign);
      im = tape.scale(component(1, kDx, off, n), sign);
      // Λu = (M_re + ιM_im)(u_re + ιu_im), traces as row vectors.
      if (dtn_re_t_) {
        re = tape.sub(re, tape.times_const(v_re, dtn_re_t_));
        im = tape.sub(im, tape.times_const(v_im, dtn_re_t_));
      }
      if (dtn_im_t_) {
        re = tape.add(re, tape.times_const(v_im, dtn_im_t_));
        im = tape.sub(im, tape.times_const(v_re, dtn_im_t_));
      }
    }
    if (data_re_[s]) {
      re = tape.add_const(re, data_re_[s]);
      im = tape.add_const(im, data_im_[s]);
    }
    rec.edge_re[s] = re;
    rec.edge_im[s] = im;
    rec.edge[s] = masked(re, im, sa.boundary[s]);
  }

  rec.total = rec.interior;
  for (const Var& t : rec.edge) rec.total = tape.add(rec.total, t);
  return rec;
}

LossFn LossAssembler::loss_fn(const SelfAdaptiveWeights& sa) const {
  return [this, sa](Tape& tape, const ParamVars& vars) { return record(tape, vars, sa).total; };
}

LossEvaluation LossAssembler::evaluate(const NetworkParams& params, const SelfAdaptiveWeights& sa,
                                       bool with_gradient) const {
  Tape tape;
  const ParamVars vars = bind_params(tape, params);
  const Recorded rec = record(tape, vars, sa);

  LossEvaluation out;
  out.report.total = tape.scalar(rec.total);
  out.report.residual_term = tape.scalar(rec.interior);
  out.residuals.interior = to_complex(tape.value(rec.interior_re), tape.value(rec.interior_im));
  for (std::size_t s = 0; s < kBoundaryCount; ++s) {
    out.report.boundary_terms[s] = tape.scalar(rec.edge[s]);
    out.residuals.boundary[s] = to_complex(tape.value(rec.edge_re[s]), tape.value(rec.edge_im[s]));
  }
  if (!std::isfinite(out.report.total)) throw NumericFailure("loss: non-finite total loss");

  if (with_gradient) {
    tape.backward(rec.total);
    out.grad = collect_gradient(tape, vars);
    out.sa_grad = sa_gradient(out.residuals, sa);
  }
  return out;
}

LossReport total_loss(const NetworkParams& params, const SelfAdaptiveWeights& sa,
                      const TrainingSet& ts, const ProblemSpec& spec, const DtNContext& ctx) {
  return LossAssembler(spec, ts, ctx).evaluate(params, sa, false).report;
}

RelativeError relative_error(std::span<const Complex> field, std::span<const Complex> ref) {
  if (field.size() != ref.size()) throw ContractViolation("relative_error: length mismatch");
  double num_re = 0.0, num_im = 0.0, den_re = 0.0, den_im = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Complex d = field[i] - ref[i];
    num_re += d.real() * d.real();
    num_im += d.imag() * d.imag();
    den_re += ref[i].real() * ref[i].real();
    den_im += ref[i].imag() * ref[i].imag();
  }
  if (!(den_re > 0.0) || !(den_im > 0.0)) {
    throw ContractViolation("relative_error: reference has zero norm in one component");
  }
  return {std::sqrt(num_re / den_re), std::sqrt(num_im / den_im)};
}

}  // namespace wgpinn
