#pragma once

#include <random>
#include <string>
#include <vector>

#include "argf/tensor.hpp"

namespace argf {

using Rng = std::mt19937_64;

enum class Activation { Linear, Sigmoid, Tanh, LeakyRelu, Softmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Leaky-ReLU negative slope used everywhere in this project.
inline constexpr double kLeakyReluSlope = 0.01;

/// Fully connected layer: activation(x * W^T + b).
struct DenseLayer {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)
  Activation activation = Activation::Linear;

  DenseLayer() = default;
  /// Glorot-uniform init: +-sqrt(6 / (in + out)).
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng);

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  std::vector<Tensor> params() const { return {weight, bias}; }
};

/// Forward pass through a dense layer, recorded on the tape.
/// Throws std::invalid_argument when x's inner dim does not match.
Tensor dense_forward(const DenseLayer& layer, const Tensor& x);

/// Adam with bias correction. Moments are owned per optimizer instance and
/// keyed by position in the parameter list handed to the constructor.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// One update from the grads currently stored on the parameters.
  /// Grads of the stepped parameters are cleared afterwards.
  /// Throws std::runtime_error on non-finite gradients (step aborted,
  /// parameters untouched).
  void step();

  std::size_t step_count() const { return step_; }
  double learning_rate() const { return lr_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t step_ = 0;
};

/// Mean squared error over all entries.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

/// Named parameter list helpers; names are "<prefix>.weight" / "<prefix>.bias".
struct NamedParam {
  std::string name;
  Tensor tensor;
};

void append_params(std::vector<NamedParam>& out, const std::string& prefix,
                   const DenseLayer& layer);

std::vector<Tensor> tensors_of(const std::vector<NamedParam>& named);

/// Value snapshots, for checkpoints and update-scope assertions.
using ParamSnapshot = std::vector<std::vector<double>>;
ParamSnapshot snapshot_values(const std::vector<Tensor>& params);
void restore_values(const std::vector<Tensor>& params, const ParamSnapshot& snapshot);

}  // namespace argf
