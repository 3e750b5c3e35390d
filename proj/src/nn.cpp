#include "argf/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace argf {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "softmax") return Activation::Softmax;
  throw std::invalid_argument("unknown activation: " + name);
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng)
    : activation(act) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in_dim * out_dim);
  for (auto& v : w) v = dist(rng);
  weight = Tensor::from({out_dim, in_dim}, std::move(w), true);
  bias = Tensor::zeros({out_dim}, true);
}

Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.cols() != layer.in_dim()) {
    throw std::invalid_argument("dense_forward: input shape " + shape_str(x) +
                                " does not match layer weight " + shape_str(layer.weight));
  }
  Tensor z = affine(x, layer.weight, layer.bias);
  switch (layer.activation) {
    case Activation::Linear: return z;
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Tanh: return tanh_act(z);
    case Activation::LeakyRelu: return leaky_relu(z, kLeakyReluSlope);
    case Activation::Softmax: return softmax_rows(z);
  }
  return z;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (double g : params_[k].grad()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("adam: non-finite gradient in parameter " +
                                 std::to_string(k) + " at step " + std::to_string(step_ + 1) +
                                 "; step aborted");
      }
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    auto& vals = p.values();
    auto& grads = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = grads[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    p.zero_grad();
  }
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  Tensor diff = sub(prediction, target);
  return mean_all(mul(diff, diff));
}

void append_params(std::vector<NamedParam>& out, const std::string& prefix,
                   const DenseLayer& layer) {
  out.push_back({prefix + ".weight", layer.weight});
  out.push_back({prefix + ".bias", layer.bias});
}

std::vector<Tensor> tensors_of(const std::vector<NamedParam>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& np : named) out.push_back(np.tensor);
  return out;
}

ParamSnapshot snapshot_values(const std::vector<Tensor>& params) {
  ParamSnapshot snap;
  snap.reserve(params.size());
  for (const auto& p : params) snap.push_back(p.values());
  return snap;
}

void restore_values(const std::vector<Tensor>& params, const ParamSnapshot& snapshot) {
  if (params.size() != snapshot.size()) {
    throw std::invalid_argument("restore_values: snapshot holds " +
                                std::to_string(snapshot.size()) + " tensors, expected " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor handle = params[i];  // shares the node
    handle.set_values(snapshot[i]);
  }
}

}  // namespace argf
