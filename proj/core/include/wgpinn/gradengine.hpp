#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "wgpinn/network.hpp"
#include "wgpinn/numcore.hpp"

namespace wgpinn {

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  std::size_t index() const { return index_; }
  bool valid() const { return index_ != kInvalid; }

 private:
  friend class Tape;
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  explicit Var(std::size_t index) : index_(index) {}
  std::size_t index_ = kInvalid;
};

enum class OpKind {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddConst,
  kSquare,
  kTanh,
  kSum,
  kSlice,
  kTimesConst,
  kWeightedSquareSum,
  kJetAffine,
  kJetTanh,
};

/// Reverse-mode tape over matrix-valued nodes.
///
/// Every node holds a dense value. The registered primitives are the
/// elementwise arithmetic below, reductions, slicing, products with constant
/// matrices, and the two jet-propagation steps of the network (affine map and
/// adaptive tanh over a jet batch). Since a jet forward pass is ordinary
/// first-order code in the parameters, one reverse sweep over it gives exact
/// gradients of losses that contain second spatial derivatives.
///
/// Nodes are evaluated eagerly when recorded. backward() accumulates
/// adjoints in strict reverse tape order, so gradients are bitwise
/// reproducible.
class Tape {
 public:
  Var leaf(Matrix value);
  Var leaf_scalar(double value);
  Var constant(Matrix value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, std::shared_ptr<const Matrix> c);
  Var add_const(Var a, Matrix c);
  Var square(Var a);
  Var tanh(Var a);
  Var sum(Var a);
  Var slice(Var a, Index row, Index col, Index rows, Index cols);
  /// a · m for a constant matrix m.
  Var times_const(Var a, std::shared_ptr<const Matrix> m);
  /// Σ w ∘ a ∘ a for a constant weight matrix w of the same shape as a.
  Var weighted_square_sum(Var a, std::shared_ptr<const Matrix> w);
  Var jet_affine(Var weight, Var bias, Var jet);
  Var jet_tanh(Var alpha, Var pre_activation);

  /// Look up a primitive by name ("add", "sub", "mul", "neg", "square",
  /// "tanh", "sum"). Anything else throws UnsupportedOperation.
  Var apply(std::string_view primitive, std::span<const Var> args);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  /// Handle of the i-th recorded node.
  Var node(std::size_t i) const;

  /// Reverse sweep from a 1 × 1 output. Throws NumericFailure if any adjoint
  /// reaching a leaf is non-finite.
  void backward(Var output);
  /// Adjoint of v after backward(); zero-shaped for nodes that need no gradient.
  const Matrix& adjoint(Var v) const;
  /// How many times the last backward() visited v.
  std::uint32_t visits(Var v) const;

  /// Recompute every non-leaf node from the leaves and return the output value.
  double replay(Var output);

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    Var in[3];
    double c = 0.0;
    Index r0 = 0, c0 = 0, nr = 0, nc = 0;
    std::shared_ptr<const Matrix> operand;
    bool needs_grad = false;
    Matrix value;
    Matrix adjoint;
    std::uint32_t visits = 0;
  };

  Var push(Node node);
  const Node& at(Var v) const;
  void evaluate(Node& node) const;
  void propagate(Node& node);
  Matrix& adjoint_of(Var v) { return nodes_[v.index()].adjoint; }

  std::vector<Node> nodes_;
};

/// Tape handles for every entry of a NetworkParams.
struct ParamVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  std::vector<Var> alphas;
};

/// Partial derivatives shaped exactly like the NetworkParams they belong to.
struct ParamGradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<double> alphas;

  static ParamGradient zeros_like(const NetworkParams& params);
  /// Same flat layout as NetworkParams::flatten().
  Vector flatten() const;
  bool all_finite() const;
};

ParamVars bind_params(Tape& tape, const NetworkParams& params);
ParamGradient collect_gradient(const Tape& tape, const ParamVars& vars);

/// Records the network's jet forward pass over a 2 × P point set; returns the
/// 2 × 5P output jet node.
Var record_jet_network(Tape& tape, const ParamVars& vars, const Matrix& points);

/// A scalar loss built from tape primitives.
using LossFn = std::function<Var(Tape&, const ParamVars&)>;

struct GradResult {
  double loss = 0.0;
  ParamGradient grad;
};

GradResult grad_loss(const NetworkParams& params, const LossFn& loss_fn);
double loss_value(const NetworkParams& params, const LossFn& loss_fn);

/// Largest relative discrepancy between the taped gradient and central
/// differences over n_probes randomly chosen parameter coordinates:
/// |analytic - fd| / max(|analytic|, 1e-12).
double fd_check(const NetworkParams& params, const LossFn& loss_fn, std::size_t n_probes,
                double step, std::uint64_t probe_seed = 0);

}  // namespace wgpinn
