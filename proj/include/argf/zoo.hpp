#pragma once

#include <memory>

#include "argf/fusion.hpp"
#include "argf/gfn.hpp"

namespace argf {

enum class FusionKind { Gfn, ConcatFc, MultFc, WeightedAvg, TensorOuter, Lmf };

std::string fusion_kind_name(FusionKind kind);
FusionKind fusion_kind_from_name(const std::string& name);
/// All kinds in the order the comparison table reports them.
std::vector<FusionKind> all_fusion_kinds();

struct FusionOptions {
  GfnOptions gfn;
  std::size_t lmf_rank = 4;
};

/// Decision over the 3k-dim concatenation of the embeddings.
class ConcatFcFusion : public Fusion {
 public:
  ConcatFcFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng);
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override;
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "concat_fc"; }
  DecisionNet dec;
};

/// Decision over the elementwise product of the embeddings.
class MultFcFusion : public Fusion {
 public:
  MultFcFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng);
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override;
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "mult_fc"; }
  DecisionNet dec;
};

/// Decision over a learned convex combination of the embeddings; the three
/// weights are a softmax over learnable logits, so they sum to 1.
class WeightedAvgFusion : public Fusion {
 public:
  WeightedAvgFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng);
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override;
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "weighted_avg"; }
  /// Current mixture weights (softmaxed logits), off the tape.
  std::array<double, 3> mixture_weights() const;
  Tensor logits;  // (1,3)
  DecisionNet dec;
};

/// Decision over the flattened triple outer product of the embeddings,
/// each first extended with a constant 1 so unimodal and bimodal
/// subtensors survive. Rejects embed_dim > 16 ((k+1)^3 blowup).
class TensorOuterFusion : public Fusion {
 public:
  TensorOuterFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng);
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override;
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "tensor"; }
  DecisionNet dec;

  static constexpr std::size_t kMaxEmbedDim = 16;
};

/// Rank-r factorized equivalent of the full tensor product, producing the
/// N-dim scores directly; a softmax turns them into the decision.
class LmfFusion : public Fusion {
 public:
  LmfFusion(std::size_t embed_dim, std::size_t num_classes, std::size_t rank, Rng& rng);
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override;
  /// Pre-softmax fused scores (B,N); equals the explicit full-tensor
  /// contraction of the rank-r factors.
  Tensor scores(const Tensor& xa, const Tensor& xv, const Tensor& xl) const;
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "lmf"; }
  std::size_t rank() const { return factors_a.size(); }

  std::vector<Tensor> factors_a, factors_v, factors_l;  // each (N, k+1)
};

std::unique_ptr<Fusion> make_fusion(FusionKind kind, std::size_t embed_dim,
                                    std::size_t num_classes, const FusionOptions& options,
                                    Rng& rng);

}  // namespace argf
