#pragma once

#include <memory>
#include <string>
#include <vector>

#include "argf/nn.hpp"
#include "argf/tensor.hpp"

namespace argf {

/// Common interface of the fusion stage: three k-dim embeddings in, one
/// N-dim decision distribution out.
class Fusion {
 public:
  virtual ~Fusion() = default;
  virtual Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) = 0;
  virtual std::vector<NamedParam> named_params() const = 0;
  virtual std::string kind() const = 0;

  std::vector<Tensor> params() const { return tensors_of(named_params()); }
};

/// Decision head shared by GFN and the baseline strategies: per-sample
/// standardization followed by dense(tanh), dense(tanh), dense(softmax).
struct DecisionNet {
  DenseLayer l1, l2, l3;
  double standardize_eps = 1e-6;

  DecisionNet() = default;
  DecisionNet(std::size_t in_dim, std::size_t hidden, std::size_t num_classes, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

}  // namespace argf
