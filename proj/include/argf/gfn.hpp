#pragma once

#include <array>
#include <vector>

#include "argf/fusion.hpp"

namespace argf {

struct GfnOptions {
  /// Constant added to the parent similarity in the vertex-weight
  /// denominator; balances similarity against parent importance.
  double similarity_offset = 0.5;
  /// Give every fusion vertex its own MLP parameters instead of sharing
  /// one net per layer.
  bool per_vertex_params = false;
};

/// Fusion net joining two k-dim information vectors:
/// dense(2k->k, leaky-relu) then dense(k->k, tanh).
struct FusionMlp {
  DenseLayer l1, l2;

  FusionMlp() = default;
  FusionMlp(std::size_t embed_dim, Rng& rng);

  Tensor forward(const Tensor& v1, const Tensor& v2) const;
  void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

// -- building blocks ----------------------------------------------------------

/// Inner product of the softmax-normalized vectors, per sample -> (B,1),
/// always in (0,1]. Similar parents mean little complementary information.
Tensor similarity(const Tensor& v1, const Tensor& v2);
/// Unnormalized vertex weight (alpha1 + alpha2) / (sim + offset).
Tensor vertex_weight_raw(const Tensor& alpha1, const Tensor& alpha2, const Tensor& sim,
                         double offset);
/// Softmax across a layer's vertices -> (B, n).
Tensor normalize_weights(const std::vector<Tensor>& raw);
/// Sum of infos scaled by their per-sample vertex weights.
Tensor weighted_info_sum(const Tensor& weights, const std::vector<Tensor>& infos);

/// Fixed vertex order used everywhere (weight exports, heatmap columns).
inline constexpr std::array<const char*, 12> kVertexNames = {
    "a", "v", "l", "al", "av", "vl", "al*av", "al*vl", "av*vl", "al+v", "av+l", "vl+a"};

/// Everything one forward pass computed: layer outputs, per-vertex info
/// vectors, vertex weights and parent similarities. Tensors stay on the
/// tape so the decision can be trained through; exports read values only.
struct GfnGraph {
  Tensor layer1_alpha;  // (B,3) raw sigmoid scores, order (a,v,l)
  Tensor layer2_alpha;  // (B,3) normalized, order (al,av,vl)
  Tensor layer2_sim;    // (B,3)
  Tensor layer3_alpha;  // (B,6) normalized, order (al*av,al*vl,av*vl,al+v,av+l,vl+a)
  Tensor layer3_sim;    // (B,6)
  std::array<Tensor, 3> bimodal_info;
  std::array<Tensor, 6> trimodal_info;
  Tensor unimodal, bimodal, trimodal;  // U, B, T, each (B,k)
  Tensor decision;                     // (B,N)
  // Per-edge weights alpha_parent / (sim + offset), values only:
  // layer2: B x 6 (two parents per bimodal vertex), layer3: B x 12.
  std::vector<double> layer2_edges;
  std::vector<double> layer3_edges;

  /// B x 12 row-major matrix of all vertex weights in kVertexNames order.
  std::vector<double> vertex_weight_rows() const;
  std::size_t batch() const { return layer1_alpha.rows(); }
};

/// Hierarchical graph fusion: a unimodal attention layer, three bimodal
/// fusion vertices, six trimodal vertices and a decision head.
class GraphFusion : public Fusion {
 public:
  GraphFusion(std::size_t embed_dim, std::size_t num_classes, GfnOptions options, Rng& rng);

  GfnGraph forward(const Tensor& xa, const Tensor& xv, const Tensor& xl) const;
  Tensor fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) override {
    return forward(xa, xv, xl).decision;
  }
  std::vector<NamedParam> named_params() const override;
  std::string kind() const override { return "gfn"; }

  std::size_t embed_dim() const { return embed_dim_; }
  const GfnOptions& options() const { return options_; }

  // Parameters are deliberately open: tests permute them and the harness
  // snapshots them through named_params().
  DenseLayer man;                // k->1 sigmoid attention scorer
  std::vector<FusionMlp> mlp2;   // 1 shared or 3 per-vertex
  std::vector<FusionMlp> mlp3;   // 1 shared or 6 per-vertex
  DecisionNet dec;               // 3k -> N

  const FusionMlp& mlp2_for(std::size_t vertex) const {
    return mlp2[options_.per_vertex_params ? vertex : 0];
  }
  const FusionMlp& mlp3_for(std::size_t vertex) const {
    return mlp3[options_.per_vertex_params ? vertex : 0];
  }

 private:
  std::size_t embed_dim_, num_classes_;
  GfnOptions options_;
};

}  // namespace argf
