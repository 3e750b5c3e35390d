#include "argf/gfn.hpp"

#include <stdexcept>

namespace argf {

namespace {

// Modality indices a=0, v=1, l=2; bimodal vertices al=0, av=1, vl=2.
constexpr std::size_t kPairs[3][2] = {{0, 2}, {0, 1}, {1, 2}};
// Unimodal modality that did not enter the bimodal vertex.
constexpr std::size_t kComplement[3] = {1, 2, 0};
// Layer-3 vertices 0..2: bimodal-pair fusions, in (al,av),(al,vl),(av,vl) order.
constexpr std::size_t kBiPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};

}  // namespace

DecisionNet::DecisionNet(std::size_t in_dim, std::size_t hidden, std::size_t num_classes,
                         Rng& rng) {
  l1 = DenseLayer(in_dim, hidden, Activation::Tanh, rng);
  l2 = DenseLayer(hidden, hidden, Activation::Tanh, rng);
  l3 = DenseLayer(hidden, num_classes, Activation::Softmax, rng);
}

Tensor DecisionNet::forward(const Tensor& x) const {
  Tensor z = row_standardize(x, standardize_eps);
  return dense_forward(l3, dense_forward(l2, dense_forward(l1, z)));
}

void DecisionNet::collect_params(std::vector<NamedParam>& out, const std::string& prefix) const {
  append_params(out, prefix + ".l1", l1);
  append_params(out, prefix + ".l2", l2);
  append_params(out, prefix + ".l3", l3);
}

FusionMlp::FusionMlp(std::size_t embed_dim, Rng& rng) {
  l1 = DenseLayer(2 * embed_dim, embed_dim, Activation::LeakyRelu, rng);
  l2 = DenseLayer(embed_dim, embed_dim, Activation::Tanh, rng);
}

Tensor FusionMlp::forward(const Tensor& v1, const Tensor& v2) const {
  return dense_forward(l2, dense_forward(l1, concat_cols({v1, v2})));
}

void FusionMlp::collect_params(std::vector<NamedParam>& out, const std::string& prefix) const {
  append_params(out, prefix + ".l1", l1);
  append_params(out, prefix + ".l2", l2);
}

Tensor similarity(const Tensor& v1, const Tensor& v2) {
  return row_sum(mul(softmax_rows(v1), softmax_rows(v2)));
}

Tensor vertex_weight_raw(const Tensor& alpha1, const Tensor& alpha2, const Tensor& sim,
                         double offset) {
  return div(add(alpha1, alpha2), add_scalar(sim, offset));
}

Tensor normalize_weights(const std::vector<Tensor>& raw) {
  return softmax_rows(concat_cols(raw));
}

Tensor weighted_info_sum(const Tensor& weights, const std::vector<Tensor>& infos) {
  if (weights.cols() != infos.size()) {
    throw std::invalid_argument("weighted_info_sum: " + std::to_string(infos.size()) +
                                " infos for weight matrix " + shape_str(weights));
  }
  Tensor out;
  for (std::size_t j = 0; j < infos.size(); ++j) {
    Tensor term = mul_colbcast(infos[j], slice_col(weights, j));
    out = out.defined() ? add(out, term) : term;
  }
  return out;
}

GraphFusion::GraphFusion(std::size_t embed_dim, std::size_t num_classes, GfnOptions options,
                         Rng& rng)
    : embed_dim_(embed_dim), num_classes_(num_classes), options_(options) {
  if (options_.similarity_offset < 0.0) {
    throw std::invalid_argument("similarity_offset must be >= 0, got " +
                                std::to_string(options_.similarity_offset));
  }
  man = DenseLayer(embed_dim, 1, Activation::Sigmoid, rng);
  const std::size_t n2 = options_.per_vertex_params ? 3 : 1;
  const std::size_t n3 = options_.per_vertex_params ? 6 : 1;
  for (std::size_t i = 0; i < n2; ++i) mlp2.emplace_back(embed_dim, rng);
  for (std::size_t i = 0; i < n3; ++i) mlp3.emplace_back(embed_dim, rng);
  dec = DecisionNet(3 * embed_dim, embed_dim, num_classes, rng);
}

GfnGraph GraphFusion::forward(const Tensor& xa, const Tensor& xv, const Tensor& xl) const {
  const std::array<Tensor, 3> V = {xa, xv, xl};
  for (const auto& v : V) {
    if (v.cols() != embed_dim_ || v.rows() != xa.rows()) {
      throw std::invalid_argument("gfn: embedding " + shape_str(v) + " does not match (batch," +
                                  std::to_string(embed_dim_) + ")");
    }
  }
  const double offset = options_.similarity_offset;
  const std::size_t B = xa.rows();
  GfnGraph g;

  // Layer 1: unimodal attention.
  std::array<Tensor, 3> a1;
  for (std::size_t m = 0; m < 3; ++m) a1[m] = dense_forward(man, V[m]);
  g.layer1_alpha = concat_cols({a1[0], a1[1], a1[2]});
  Tensor u;
  for (std::size_t m = 0; m < 3; ++m) {
    Tensor term = mul_colbcast(V[m], a1[m]);
    u = u.defined() ? add(u, term) : term;
  }
  g.unimodal = scale(u, 1.0 / 3.0);

  // Layer 2: bimodal vertices.
  std::vector<Tensor> raw2;
  std::vector<Tensor> sims2;
  std::vector<Tensor> infos2;
  for (std::size_t j = 0; j < 3; ++j) {
    const Tensor& p1 = V[kPairs[j][0]];
    const Tensor& p2 = V[kPairs[j][1]];
    g.bimodal_info[j] = mlp2_for(j).forward(p1, p2);
    infos2.push_back(g.bimodal_info[j]);
    Tensor s = similarity(p1, p2);
    sims2.push_back(s);
    raw2.push_back(vertex_weight_raw(a1[kPairs[j][0]], a1[kPairs[j][1]], s, offset));
  }
  g.layer2_sim = concat_cols(sims2);
  g.layer2_alpha = normalize_weights(raw2);
  g.bimodal = weighted_info_sum(g.layer2_alpha, infos2);

  // Layer 3: six trimodal vertices. Bimodal parents carry their normalized
  // layer-2 weight, unimodal parents their raw attention score.
  std::vector<Tensor> raw3;
  std::vector<Tensor> sims3;
  std::vector<Tensor> infos3;
  std::array<std::array<Tensor, 2>, 6> parent_alpha;
  for (std::size_t t = 0; t < 3; ++t) {
    const std::size_t b1 = kBiPairs[t][0], b2 = kBiPairs[t][1];
    g.trimodal_info[t] = mlp3_for(t).forward(g.bimodal_info[b1], g.bimodal_info[b2]);
    infos3.push_back(g.trimodal_info[t]);
    Tensor s = similarity(g.bimodal_info[b1], g.bimodal_info[b2]);
    sims3.push_back(s);
    parent_alpha[t] = {slice_col(g.layer2_alpha, b1), slice_col(g.layer2_alpha, b2)};
    raw3.push_back(vertex_weight_raw(parent_alpha[t][0], parent_alpha[t][1], s, offset));
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const std::size_t t = 3 + j;
    const std::size_t uni = kComplement[j];
    g.trimodal_info[t] = mlp3_for(t).forward(g.bimodal_info[j], V[uni]);
    infos3.push_back(g.trimodal_info[t]);
    Tensor s = similarity(g.bimodal_info[j], V[uni]);
    sims3.push_back(s);
    parent_alpha[t] = {slice_col(g.layer2_alpha, j), a1[uni]};
    raw3.push_back(vertex_weight_raw(parent_alpha[t][0], parent_alpha[t][1], s, offset));
  }
  g.layer3_sim = concat_cols(sims3);
  g.layer3_alpha = normalize_weights(raw3);
  g.trimodal = weighted_info_sum(g.layer3_alpha, infos3);

  // Decision over the concatenated dynamics.
  g.decision = dec.forward(concat_cols({g.unimodal, g.bimodal, g.trimodal}));

  // Per-edge weights for interpretability dumps (values only, off tape).
  g.layer2_edges.assign(B * 6, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double denom = g.layer2_sim.values()[r * 3 + j] + offset;
      g.layer2_edges[r * 6 + 2 * j] = a1[kPairs[j][0]].values()[r] / denom;
      g.layer2_edges[r * 6 + 2 * j + 1] = a1[kPairs[j][1]].values()[r] / denom;
    }
  }
  g.layer3_edges.assign(B * 12, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t t = 0; t < 6; ++t) {
      const double denom = g.layer3_sim.values()[r * 6 + t] + offset;
      g.layer3_edges[r * 12 + 2 * t] = parent_alpha[t][0].values()[r] / denom;
      g.layer3_edges[r * 12 + 2 * t + 1] = parent_alpha[t][1].values()[r] / denom;
    }
  }
  return g;
}

std::vector<double> GfnGraph::vertex_weight_rows() const {
  const std::size_t B = batch();
  std::vector<double> out(B * 12);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < 3; ++c) out[r * 12 + c] = layer1_alpha.values()[r * 3 + c];
    for (std::size_t c = 0; c < 3; ++c) out[r * 12 + 3 + c] = layer2_alpha.values()[r * 3 + c];
    for (std::size_t c = 0; c < 6; ++c) out[r * 12 + 6 + c] = layer3_alpha.values()[r * 6 + c];
  }
  return out;
}

std::vector<NamedParam> GraphFusion::named_params() const {
  std::vector<NamedParam> out;
  append_params(out, "gfn.man", man);
  for (std::size_t i = 0; i < mlp2.size(); ++i) {
    mlp2[i].collect_params(out, "gfn.mlp2." + std::to_string(i));
  }
  for (std::size_t i = 0; i < mlp3.size(); ++i) {
    mlp3[i].collect_params(out, "gfn.mlp3." + std::to_string(i));
  }
  dec.collect_params(out, "gfn.dec");
  return out;
}

}  // namespace argf
