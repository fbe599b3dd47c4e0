#include "wgpinn/gradengine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wgpinn {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string("tape ") + op + ": operand shapes differ");
  }
}

void accumulate(Matrix& adj, const Matrix& delta) {
  if (adj.size() == 0) {
    adj = delta;
  } else {
    adj += delta;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Recording

Var Tape::push(Node node) {
  for (const Var& in : node.in) {
    if (in.valid()) {
      if (in.index() >= nodes_.size()) throw ContractViolation("tape: operand from another tape");
      node.needs_grad = node.needs_grad || nodes_[in.index()].needs_grad;
    }
  }
  nodes_.push_back(std::move(node));
  const std::size_t idx = nodes_.size() - 1;
  evaluate(nodes_[idx]);
  return Var(idx);
}

const Tape::Node& Tape::at(Var v) const {
  if (!v.valid() || v.index() >= nodes_.size()) throw ContractViolation("tape: invalid variable");
  return nodes_[v.index()];
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.needs_grad = true;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::leaf_scalar(double value) { return leaf(Matrix::Constant(1, 1, value)); }

Var Tape::constant(Matrix value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::add(Var a, Var b) {
  require_same_shape(at(a).value, at(b).value, "add");
  Node n;
  n.kind = OpKind::kAdd;
  n.in[0] = a;
  n.in[1] = b;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(at(a).value, at(b).value, "sub");
  Node n;
  n.kind = OpKind::kSub;
  n.in[0] = a;
  n.in[1] = b;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(at(a).value, at(b).value, "mul");
  Node n;
  n.kind = OpKind::kMul;
  n.in[0] = a;
  n.in[1] = b;
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  at(a);
  Node n;
  n.kind = OpKind::kScale;
  n.in[0] = a;
  n.c = c;
  return push(std::move(n));
}

Var Tape::add_const(Var a, std::shared_ptr<const Matrix> c) {
  require_same_shape(at(a).value, *c, "add_const");
  Node n;
  n.kind = OpKind::kAddConst;
  n.in[0] = a;
  n.operand = std::move(c);
  return push(std::move(n));
}

Var Tape::add_const(Var a, Matrix c) {
  return add_const(a, std::make_shared<const Matrix>(std::move(c)));
}

Var Tape::square(Var a) {
  at(a);
  Node n;
  n.kind = OpKind::kSquare;
  n.in[0] = a;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  at(a);
  Node n;
  n.kind = OpKind::kTanh;
  n.in[0] = a;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  at(a);
  Node n;
  n.kind = OpKind::kSum;
  n.in[0] = a;
  return push(std::move(n));
}

Var Tape::slice(Var a, Index row, Index col, Index rows, Index cols) {
  const Matrix& v = at(a).value;
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > v.rows() ||
      col + cols > v.cols()) {
    throw ContractViolation("tape slice: block out of range");
  }
  Node n;
  n.kind = OpKind::kSlice;
  n.in[0] = a;
  n.r0 = row;
  n.c0 = col;
  n.nr = rows;
  n.nc = cols;
  return push(std::move(n));
}

Var Tape::times_const(Var a, std::shared_ptr<const Matrix> m) {
  if (at(a).value.cols() != m->rows()) throw ContractViolation("tape times_const: shape mismatch");
  Node n;
  n.kind = OpKind::kTimesConst;
  n.in[0] = a;
  n.operand = std::move(m);
  return push(std::move(n));
}

Var Tape::weighted_square_sum(Var a, std::shared_ptr<const Matrix> w) {
  require_same_shape(at(a).value, *w, "weighted_square_sum");
  Node n;
  n.kind = OpKind::kWeightedSquareSum;
  n.in[0] = a;
  n.operand = std::move(w);
  return push(std::move(n));
}

Var Tape::jet_affine(Var weight, Var bias, Var jet) {
  const Matrix& w = at(weight).value;
  const Matrix& b = at(bias).value;
  const Matrix& x = at(jet).value;
  if (w.cols() != x.rows() || b.rows() != w.rows() || b.cols() != 1 || x.cols() % kJetBlocks != 0) {
    throw ContractViolation("tape jet_affine: shape mismatch");
  }
  Node n;
  n.kind = OpKind::kJetAffine;
  n.in[0] = weight;
  n.in[1] = bias;
  n.in[2] = jet;
  return push(std::move(n));
}

Var Tape::jet_tanh(Var alpha, Var pre_activation) {
  if (at(alpha).value.size() != 1) throw ContractViolation("tape jet_tanh: alpha must be 1 × 1");
  if (at(pre_activation).value.cols() % kJetBlocks != 0) {
    throw ContractViolation("tape jet_tanh: bad jet width");
  }
  Node n;
  n.kind = OpKind::kJetTanh;
  n.in[0] = alpha;
  n.in[1] = pre_activation;
  return push(std::move(n));
}

Var Tape::apply(std::string_view primitive, std::span<const Var> args) {
  auto arity = [&](std::size_t n) {
    if (args.size() != n) {
      throw ContractViolation("tape apply '" + std::string(primitive) + "': expected " +
                              std::to_string(n) + " operands");
    }
  };
  if (primitive == "add") { arity(2); return add(args[0], args[1]); }
  if (primitive == "sub") { arity(2); return sub(args[0], args[1]); }
  if (primitive == "mul") { arity(2); return mul(args[0], args[1]); }
  if (primitive == "neg") { arity(1); return scale(args[0], -1.0); }
  if (primitive == "square") { arity(1); return square(args[0]); }
  if (primitive == "tanh") { arity(1); return tanh(args[0]); }
  if (primitive == "sum") { arity(1); return sum(args[0]); }
  throw UnsupportedOperation("tape: no primitive named '" + std::string(primitive) + "'");
}

const Matrix& Tape::value(Var v) const { return at(v).value; }

double Tape::scalar(Var v) const {
  const Matrix& m = at(v).value;
  if (m.size() != 1) throw ContractViolation("tape: node is not a scalar");
  return m(0, 0);
}

OpKind Tape::kind(Var v) const { return at(v).kind; }

Var Tape::node(std::size_t i) const {
  if (i >= nodes_.size()) throw ContractViolation("tape: node index out of range");
  return Var(i);
}

const Matrix& Tape::adjoint(Var v) const { return at(v).adjoint; }

std::uint32_t Tape::visits(Var v) const { return at(v).visits; }

// ---------------------------------------------------------------------------
// Forward kernels

void Tape::evaluate(Node& n) const {
  auto in = [this, &n](int i) -> const Matrix& { return nodes_[n.in[i].index()].value; };
  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      return;
    case OpKind::kAdd:
      n.value = in(0) + in(1);
      return;
    case OpKind::kSub:
      n.value = in(0) - in(1);
      return;
    case OpKind::kMul:
      n.value = in(0).cwiseProduct(in(1));
      return;
    case OpKind::kScale:
      n.value = n.c * in(0);
      return;
    case OpKind::kAddConst:
      n.value = in(0) + *n.operand;
      return;
    case OpKind::kSquare:
      n.value = in(0).array().square().matrix();
      return;
    case OpKind::kTanh:
      n.value = in(0).array().tanh().matrix();
      return;
    case OpKind::kSum:
      n.value = Matrix::Constant(1, 1, in(0).sum());
      return;
    case OpKind::kSlice:
      n.value = in(0).block(n.r0, n.c0, n.nr, n.nc);
      return;
    case OpKind::kTimesConst:
      n.value = in(0) * *n.operand;
      return;
    case OpKind::kWeightedSquareSum:
      n.value = Matrix::Constant(1, 1, (n.operand->array() * in(0).array().square()).sum());
      return;
    case OpKind::kJetAffine:
      n.value = wgpinn::jet_affine(in(0), in(1).col(0), in(2));
      return;
    case OpKind::kJetTanh:
      n.value = wgpinn::jet_adaptive_tanh(in(0)(0, 0), in(1));
      return;
  }
}

// ---------------------------------------------------------------------------
// Reverse kernels

namespace {

// Adjoint of jet_adaptive_tanh. g is the adjoint of the output jet; returns
// the adjoint of the pre-activation jet and adds d/dalpha into *g_alpha.
Matrix jet_tanh_backward(double alpha, const Matrix& pre, const Matrix& out, const Matrix& g,
                         double* g_alpha) {
  const Index p = pre.cols() / kJetBlocks;
  const auto a0 = pre.middleCols(kValue * p, p).array();
  const auto ax = pre.middleCols(kDx * p, p).array();
  const auto az = pre.middleCols(kDz * p, p).array();
  const auto axx = pre.middleCols(kDxx * p, p).array();
  const auto azz = pre.middleCols(kDzz * p, p).array();
  const auto g0 = g.middleCols(kValue * p, p).array();
  const auto gx = g.middleCols(kDx * p, p).array();
  const auto gz = g.middleCols(kDz * p, p).array();
  const auto gxx = g.middleCols(kDxx * p, p).array();
  const auto gzz = g.middleCols(kDzz * p, p).array();

  // Derivatives of tanh with respect to s = alpha·a, from the stored t.
  const Eigen::ArrayXXd t = out.middleCols(kValue * p, p).array();
  const Eigen::ArrayXXd d1 = 1.0 - t.square();
  const Eigen::ArrayXXd d2 = -2.0 * t * d1;
  const Eigen::ArrayXXd d3 = -2.0 * d1.square() - 2.0 * t * d2;

  const double a2 = alpha * alpha;
  const Eigen::ArrayXXd first = ax * gx + az * gz + axx * gxx + azz * gzz;
  const Eigen::ArrayXXd curv = ax.square() * gxx + az.square() * gzz;

  // Adjoint of s through every block that depends on t, t' or t''.
  const Eigen::ArrayXXd gs = d1 * g0 + alpha * d2 * first + a2 * d3 * curv;

  Matrix g_pre(pre.rows(), pre.cols());
  g_pre.middleCols(kValue * p, p) = (alpha * gs).matrix();
  g_pre.middleCols(kDx * p, p) = (alpha * d1 * gx + 2.0 * a2 * d2 * ax * gxx).matrix();
  g_pre.middleCols(kDz * p, p) = (alpha * d1 * gz + 2.0 * a2 * d2 * az * gzz).matrix();
  g_pre.middleCols(kDxx * p, p) = (alpha * d1 * gxx).matrix();
  g_pre.middleCols(kDzz * p, p) = (alpha * d1 * gzz).matrix();

  // alpha enters through s and explicitly through the alpha, alpha² prefactors.
  *g_alpha += (a0 * gs).sum() + (d1 * first).sum() + (2.0 * alpha * d2 * curv).sum();
  return g_pre;
}

}  // namespace

void Tape::propagate(Node& n) {
  const Matrix& g = n.adjoint;
  auto wants = [this, &n](int i) { return n.in[i].valid() && nodes_[n.in[i].index()].needs_grad; };
  auto in = [this, &n](int i) -> const Matrix& { return nodes_[n.in[i].index()].value; };
  auto adj = [this, &n](int i) -> Matrix& { return adjoint_of(n.in[i]); };

  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      return;
    case OpKind::kAdd:
      if (wants(0)) accumulate(adj(0), g);
      if (wants(1)) accumulate(adj(1), g);
      return;
    case OpKind::kSub:
      if (wants(0)) accumulate(adj(0), g);
      if (wants(1)) accumulate(adj(1), -g);
      return;
    case OpKind::kMul:
      if (wants(0)) accumulate(adj(0), g.cwiseProduct(in(1)));
      if (wants(1)) accumulate(adj(1), g.cwiseProduct(in(0)));
      return;
    case OpKind::kScale:
      if (wants(0)) accumulate(adj(0), n.c * g);
      return;
    case OpKind::kAddConst:
      if (wants(0)) accumulate(adj(0), g);
      return;
    case OpKind::kSquare:
      if (wants(0)) accumulate(adj(0), 2.0 * g.cwiseProduct(in(0)));
      return;
    case OpKind::kTanh:
      if (wants(0)) {
        accumulate(adj(0), (g.array() * (1.0 - n.value.array().square())).matrix());
      }
      return;
    case OpKind::kSum:
      if (wants(0)) accumulate(adj(0), Matrix::Constant(in(0).rows(), in(0).cols(), g(0, 0)));
      return;
    case OpKind::kSlice:
      if (wants(0)) {
        Matrix& a = adj(0);
        if (a.size() == 0) a = Matrix::Zero(in(0).rows(), in(0).cols());
        a.block(n.r0, n.c0, n.nr, n.nc) += g;
      }
      return;
    case OpKind::kTimesConst:
      if (wants(0)) accumulate(adj(0), g * n.operand->transpose());
      return;
    case OpKind::kWeightedSquareSum:
      if (wants(0)) {
        accumulate(adj(0), (2.0 * g(0, 0) * n.operand->array() * in(0).array()).matrix());
      }
      return;
    case OpKind::kJetAffine: {
      const Matrix& w = in(0);
      const Matrix& x = in(2);
      const Index p = x.cols() / kJetBlocks;
      if (wants(0)) accumulate(adj(0), g * x.transpose());
      if (wants(1)) accumulate(adj(1), g.middleCols(kValue * p, p).rowwise().sum());
      if (wants(2)) accumulate(adj(2), w.transpose() * g);
      return;
    }
    case OpKind::kJetTanh: {
      double g_alpha = 0.0;
      Matrix g_pre = jet_tanh_backward(in(0)(0, 0), in(1), n.value, g, &g_alpha);
      if (wants(0)) accumulate(adj(0), Matrix::Constant(1, 1, g_alpha));
      if (wants(1)) accumulate(adj(1), g_pre);
      return;
    }
  }
}

void Tape::backward(Var output) {
  const Node& out = at(output);
  if (out.value.size() != 1) throw ContractViolation("tape backward: output must be 1 × 1");
  for (Node& n : nodes_) {
    n.adjoint.resize(0, 0);
    n.visits = 0;
  }
  nodes_[output.index()].adjoint = Matrix::Ones(1, 1);
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    ++n.visits;
    if (!n.needs_grad || n.adjoint.size() == 0) continue;
    propagate(n);
    if (n.kind == OpKind::kLeaf && !n.adjoint.allFinite()) {
      throw NumericFailure("tape backward: non-finite adjoint at leaf " + std::to_string(i));
    }
  }
  // Leaves the output does not depend on still report a zero gradient.
  for (std::size_t i = 0; i <= output.index(); ++i) {
    Node& n = nodes_[i];
    if (n.kind == OpKind::kLeaf && n.adjoint.size() == 0) {
      n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
    }
  }
}

double Tape::replay(Var output) {
  at(output);
  for (std::size_t i = 0; i <= output.index(); ++i) evaluate(nodes_[i]);
  return scalar(output);
}

// ---------------------------------------------------------------------------
// Network binding

ParamGradient ParamGradient::zeros_like(const NetworkParams& params) {
  ParamGradient g;
  for (const auto& w : params.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : params.biases) g.biases.push_back(Vector::Zero(b.size()));
  g.alphas.assign(params.alphas.size(), 0.0);
  return g;
}

Vector ParamGradient::flatten() const {
  Index n = static_cast<Index>(alphas.size());
  for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
  Vector flat(n);
  Index k = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (Index r = 0; r < weights[i].rows(); ++r) {
      for (Index c = 0; c < weights[i].cols(); ++c) flat[k++] = weights[i](r, c);
    }
    for (Index r = 0; r < biases[i].size(); ++r) flat[k++] = biases[i][r];
  }
  for (double a : alphas) flat[k++] = a;
  return flat;
}

bool ParamGradient::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return std::all_of(alphas.begin(), alphas.end(), [](double a) { return std::isfinite(a); });
}

ParamVars bind_params(Tape& tape, const NetworkParams& params) {
  params.validate();
  ParamVars vars;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    vars.weights.push_back(tape.leaf(params.weights[i]));
    vars.biases.push_back(tape.leaf(Matrix(params.biases[i])));
  }
  for (double a : params.alphas) vars.alphas.push_back(tape.leaf_scalar(a));
  return vars;
}

ParamGradient collect_gradient(const Tape& tape, const ParamVars& vars) {
  ParamGradient g;
  for (Var w : vars.weights) g.weights.push_back(tape.adjoint(w));
  for (Var b : vars.biases) g.biases.push_back(tape.adjoint(b).col(0));
  for (Var a : vars.alphas) g.alphas.push_back(tape.adjoint(a)(0, 0));
  return g;
}

Var record_jet_network(Tape& tape, const ParamVars& vars, const Matrix& points) {
  Var jet = tape.constant(seed_input_jet(points));
  const std::size_t hidden = vars.alphas.size();
  for (std::size_t i = 0; i < hidden; ++i) {
    jet = tape.jet_tanh(vars.alphas[i], tape.jet_affine(vars.weights[i], vars.biases[i], jet));
  }
  return tape.jet_affine(vars.weights[hidden], vars.biases[hidden], jet);
}

GradResult grad_loss(const NetworkParams& params, const LossFn& loss_fn) {
  Tape tape;
  const ParamVars vars = bind_params(tape, params);
  const Var loss = loss_fn(tape, vars);
  GradResult result;
  result.loss = tape.scalar(loss);
  if (!std::isfinite(result.loss)) throw NumericFailure("grad_loss: non-finite loss");
  tape.backward(loss);
  result.grad = collect_gradient(tape, vars);
  return result;
}

double loss_value(const NetworkParams& params, const LossFn& loss_fn) {
  Tape tape;
  const ParamVars vars = bind_params(tape, params);
  return tape.scalar(loss_fn(tape, vars));
}

double fd_check(const NetworkParams& params, const LossFn& loss_fn, std::size_t n_probes,
                double step, std::uint64_t probe_seed) {
  if (!(step > 0.0)) throw ContractViolation("fd_check: step must be positive");
  if (n_probes == 0) throw ContractViolation("fd_check: need at least one probe");
  const Vector analytic = grad_loss(params, loss_fn).grad.flatten();
  const Vector base = params.flatten();
  SeededRng rng(probe_seed);
  NetworkParams probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < n_probes; ++i) {
    const auto k = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(base.size()));
    Vector shifted = base;
    shifted[k] = base[k] + step;
    probe.unflatten(shifted);
    const double up = loss_value(probe, loss_fn);
    shifted[k] = base[k] - step;
    probe.unflatten(shifted);
    const double down = loss_value(probe, loss_fn);
    const double fd = (up - down) / (2.0 * step);
    const double rel = std::abs(analytic[k] - fd) / std::max(std::abs(analytic[k]), 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace wgpinn
