#include "wgpinn/network.hpp"

#include <cmath>
#include <string>

namespace wgpinn {

namespace {

void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) {
    throw NumericFailure(std::string("non-finite value in ") + where);
  }
}

}  // namespace

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = alphas.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    n += static_cast<std::size_t>(weights[i].size() + biases[i].size());
  }
  return n;
}

void NetworkParams::validate() const {
  if (layer_sizes.size() < 3 || layer_sizes.front() != 2 || layer_sizes.back() != 2) {
    throw ContractViolation("network: layer_sizes must look like {2, N_1, ..., N_M, 2} with M >= 1");
  }
  const std::size_t layers = layer_sizes.size() - 1;
  if (weights.size() != layers || biases.size() != layers) {
    throw ContractViolation("network: expected one weight matrix and bias per layer");
  }
  if (alphas.size() != layers - 1) {
    throw ContractViolation("network: expected one alpha per hidden layer");
  }
  for (std::size_t i = 0; i < layers; ++i) {
    const auto rows = static_cast<Index>(layer_sizes[i + 1]);
    const auto cols = static_cast<Index>(layer_sizes[i]);
    if (weights[i].rows() != rows || weights[i].cols() != cols) {
      throw ContractViolation("network: weight " + std::to_string(i) + " has the wrong shape");
    }
    if (biases[i].size() != rows) {
      throw ContractViolation("network: bias " + std::to_string(i) + " has the wrong length");
    }
  }
}

Vector NetworkParams::flatten() const {
  Vector flat(static_cast<Index>(parameter_count()));
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

void NetworkParams::unflatten(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ContractViolation("network: flat parameter vector has the wrong length");
  }
  Index k = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (Index r = 0; r < weights[i].rows(); ++r) {
      for (Index c = 0; c < weights[i].cols(); ++c) weights[i](r, c) = flat[k++];
    }
    for (Index r = 0; r < biases[i].size(); ++r) biases[i][r] = flat[k++];
  }
  for (double& a : alphas) a = flat[k++];
}

std::vector<std::size_t> make_layer_sizes(std::size_t hidden_layers, std::size_t width) {
  std::vector<std::size_t> sizes;
  sizes.push_back(2);
  for (std::size_t i = 0; i < hidden_layers; ++i) sizes.push_back(width);
  sizes.push_back(2);
  return sizes;
}

NetworkParams init_params(SeededRng& rng, const std::vector<std::size_t>& layer_sizes,
                          double alpha0) {
  NetworkParams p;
  p.layer_sizes = layer_sizes;
  if (layer_sizes.size() < 3 || layer_sizes.front() != 2 || layer_sizes.back() != 2) {
    throw ContractViolation("init_params: layer_sizes must start and end with 2 and have a hidden layer");
  }
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    if (layer_sizes[i + 1] == 0) throw ContractViolation("init_params: empty layer");
    p.weights.push_back(glorot_normal(rng, layer_sizes[i], layer_sizes[i + 1]));
    p.biases.push_back(Vector::Zero(static_cast<Index>(layer_sizes[i + 1])));
  }
  p.alphas.assign(layer_sizes.size() - 2, alpha0);
  return p;
}

FieldValue forward(const NetworkParams& params, double x, double z) {
  Vector l(2);
  l << x, z;
  const std::size_t hidden = params.hidden_layers();
  for (std::size_t i = 0; i < hidden; ++i) {
    Vector pre = params.weights[i] * l + params.biases[i];
    l = (params.alphas[i] * pre.array()).tanh().matrix();
  }
  const Vector out = params.weights[hidden] * l + params.biases[hidden];
  if (!out.allFinite()) throw NumericFailure("forward: non-finite network output");
  return {out[0], out[1]};
}

ComplexJet jet_forward(const NetworkParams& params, double x, double z) {
  Matrix pt(2, 1);
  pt << x, z;
  const Matrix j = jet_forward_batch(params, pt);
  auto real_jet = [&j](Index row) {
    return RealJet{j(row, kValue), j(row, kDx), j(row, kDz), j(row, kDxx), j(row, kDzz)};
  };
  return {real_jet(0), real_jet(1)};
}

Matrix seed_input_jet(const Matrix& points) {
  if (points.rows() != 2) throw ContractViolation("seed_input_jet: points must be 2 × P");
  const Index p = points.cols();
  Matrix jet = Matrix::Zero(2, kJetBlocks * p);
  jet.middleCols(kValue * p, p) = points;
  jet.block(0, kDx * p, 1, p).setOnes();
  jet.block(1, kDz * p, 1, p).setOnes();
  return jet;
}

Matrix jet_affine(const Matrix& weight, const Vector& bias, const Matrix& jet) {
  if (weight.cols() != jet.rows() || bias.size() != weight.rows() ||
      jet.cols() % kJetBlocks != 0) {
    throw ContractViolation("jet_affine: shape mismatch");
  }
  const Index p = jet.cols() / kJetBlocks;
  Matrix out = weight * jet;
  out.middleCols(kValue * p, p).colwise() += bias;
  return out;
}

Matrix jet_adaptive_tanh(double alpha, const Matrix& pre) {
  if (pre.cols() % kJetBlocks != 0) throw ContractViolation("jet_adaptive_tanh: bad jet width");
  const Index p = pre.cols() / kJetBlocks;
  const Index n = pre.rows();
  Matrix out(n, pre.cols());

  const auto a0 = pre.middleCols(kValue * p, p).array();
  const auto ax = pre.middleCols(kDx * p, p).array();
  const auto az = pre.middleCols(kDz * p, p).array();
  const auto axx = pre.middleCols(kDxx * p, p).array();
  const auto azz = pre.middleCols(kDzz * p, p).array();

  // t = tanh(s), s = alpha·a;  dt/ds = 1 - t²;  d²t/ds² = -2 t (1 - t²)
  const Eigen::ArrayXXd t = (alpha * a0).tanh();
  const Eigen::ArrayXXd d1 = 1.0 - t.square();
  const Eigen::ArrayXXd d2 = -2.0 * t * d1;

  out.middleCols(kValue * p, p) = t.matrix();
  out.middleCols(kDx * p, p) = (alpha * d1 * ax).matrix();
  out.middleCols(kDz * p, p) = (alpha * d1 * az).matrix();
  out.middleCols(kDxx * p, p) = (alpha * d1 * axx + alpha * alpha * d2 * ax.square()).matrix();
  out.middleCols(kDzz * p, p) = (alpha * d1 * azz + alpha * alpha * d2 * az.square()).matrix();
  return out;
}

Matrix forward_batch(const NetworkParams& params, const Matrix& points) {
  if (points.rows() != 2) throw ContractViolation("forward_batch: points must be 2 × P");
  Matrix l = points;
  const std::size_t hidden = params.hidden_layers();
  for (std::size_t i = 0; i < hidden; ++i) {
    Matrix pre = params.weights[i] * l;
    pre.colwise() += params.biases[i];
    l = (params.alphas[i] * pre.array()).tanh().matrix();
  }
  Matrix out = params.weights[hidden] * l;
  out.colwise() += params.biases[hidden];
  require_finite(out, "forward_batch");
  return out;
}

Matrix jet_forward_batch(const NetworkParams& params, const Matrix& points) {
  Matrix jet = seed_input_jet(points);
  const std::size_t hidden = params.hidden_layers();
  for (std::size_t i = 0; i < hidden; ++i) {
    jet = jet_adaptive_tanh(params.alphas[i], jet_affine(params.weights[i], params.biases[i], jet));
    require_finite(jet, "jet_forward hidden layer");
  }
  jet = jet_affine(params.weights[hidden], params.biases[hidden], jet);
  require_finite(jet, "jet_forward output layer");
  return jet;
}

}  // namespace wgpinn
