#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wgpinn/numcore.hpp"

namespace wgpinn {

/// Trainable parameters of the fully connected surrogate
///
///   l_0 = (x, z)
///   l_i = tanh(alpha_i * (W_i l_{i-1} + b_i)),  i = 1..M
///   u   = W_{M+1} l_M + b_{M+1}                 (row 0: Re u, row 1: Im u)
///
/// layer_sizes = {2, N_1, ..., N_M, 2}. weights[i] is N_{i+1} × N_i.
struct NetworkParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<double> alphas;  // one per hidden layer

  std::size_t hidden_layers() const { return alphas.size(); }
  std::size_t parameter_count() const;

  /// Throws ContractViolation if the shapes are inconsistent.
  void validate() const;

  /// Flat layout: for each layer W (row-major) then b; all alphas last.
  Vector flatten() const;
  void unflatten(const Vector& flat);
};

/// {2, width × hidden, 2}.
std::vector<std::size_t> make_layer_sizes(std::size_t hidden_layers, std::size_t width);

/// Glorot-normal weights, zero biases, every alpha set to alpha0.
NetworkParams init_params(SeededRng& rng, const std::vector<std::size_t>& layer_sizes,
                          double alpha0);

/// Value and first/second partial derivatives in x and z of one real field.
struct RealJet {
  double v = 0.0;
  double dx = 0.0;
  double dz = 0.0;
  double dxx = 0.0;
  double dzz = 0.0;
};

struct ComplexJet {
  RealJet re;
  RealJet im;
};

struct FieldValue {
  double re = 0.0;
  double im = 0.0;
};

FieldValue forward(const NetworkParams& params, double x, double z);
ComplexJet jet_forward(const NetworkParams& params, double x, double z);

// ---------------------------------------------------------------------------
// Batched jets.
//
// A jet batch over P points is a rows × 5P matrix made of five column blocks
// [value | d/dx | d/dz | d²/dx² | d²/dz²], each rows × P. Points are passed
// as a 2 × P matrix (row 0: x, row 1: z).

enum JetBlock : Index { kValue = 0, kDx = 1, kDz = 2, kDxx = 3, kDzz = 4 };
inline constexpr Index kJetBlocks = 5;

/// Jet of the identity map on the input coordinates.
Matrix seed_input_jet(const Matrix& points);

/// W · jet, with b added to the value block only.
Matrix jet_affine(const Matrix& weight, const Vector& bias, const Matrix& jet);

/// Elementwise tanh(alpha · a) pushed through the chain rule for every block.
Matrix jet_adaptive_tanh(double alpha, const Matrix& pre_activation);

/// 2 × P network values.
Matrix forward_batch(const NetworkParams& params, const Matrix& points);

/// 2 × 5P output jet.
Matrix jet_forward_batch(const NetworkParams& params, const Matrix& points);

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Text format, version 1:
//
//   wgpinn-checkpoint 1
//   meta <key> <value>          (zero or more, value runs to end of line)
//   layers <L> <n_0> ... <n_{L-1}>
//   alphas <M> <hexfloat> ...
//   weight <i> <rows> <cols>    followed by rows lines of hexfloats
//   bias <i> <len>              followed by one line of hexfloats
//   end
//
// Numbers are written as C99 hexadecimal floats so a reload is bit-exact.

struct Checkpoint {
  NetworkParams params;
  std::map<std::string, std::string> meta;
};

void write_checkpoint(std::ostream& out, const NetworkParams& params,
                      const std::map<std::string, std::string>& meta = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wgpinn
