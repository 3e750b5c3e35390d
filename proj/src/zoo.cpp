#include "argf/zoo.hpp"

#include <cmath>
#include <stdexcept>

namespace argf {

namespace {

Tensor with_one(const Tensor& x) {
  return concat_cols({x, Tensor::full({x.rows(), 1}, 1.0)});
}

}  // namespace

std::string fusion_kind_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::Gfn: return "gfn";
    case FusionKind::ConcatFc: return "concat_fc";
    case FusionKind::MultFc: return "mult_fc";
    case FusionKind::WeightedAvg: return "weighted_avg";
    case FusionKind::TensorOuter: return "tensor";
    case FusionKind::Lmf: return "lmf";
  }
  return "unknown";
}

FusionKind fusion_kind_from_name(const std::string& name) {
  if (name == "gfn") return FusionKind::Gfn;
  if (name == "concat_fc") return FusionKind::ConcatFc;
  if (name == "mult_fc") return FusionKind::MultFc;
  if (name == "weighted_avg") return FusionKind::WeightedAvg;
  if (name == "tensor") return FusionKind::TensorOuter;
  if (name == "lmf") return FusionKind::Lmf;
  throw std::invalid_argument("unknown fusion kind: " + name);
}

std::vector<FusionKind> all_fusion_kinds() {
  return {FusionKind::ConcatFc, FusionKind::MultFc, FusionKind::WeightedAvg,
          FusionKind::TensorOuter, FusionKind::Lmf, FusionKind::Gfn};
}

// -- concat + FC ---------------------------------------------------------------

ConcatFcFusion::ConcatFcFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng)
    : dec(3 * embed_dim, embed_dim, num_classes, rng) {}

Tensor ConcatFcFusion::fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) {
  return dec.forward(concat_cols({xa, xv, xl}));
}

std::vector<NamedParam> ConcatFcFusion::named_params() const {
  std::vector<NamedParam> out;
  dec.collect_params(out, "concat_fc.dec");
  return out;
}

// -- multiplication + FC ---------------------------------------------------------

MultFcFusion::MultFcFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng)
    : dec(embed_dim, embed_dim, num_classes, rng) {}

Tensor MultFcFusion::fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) {
  return dec.forward(mul(mul(xa, xv), xl));
}

std::vector<NamedParam> MultFcFusion::named_params() const {
  std::vector<NamedParam> out;
  dec.collect_params(out, "mult_fc.dec");
  return out;
}

// -- weighted average -------------------------------------------------------------

WeightedAvgFusion::WeightedAvgFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng)
    : logits(Tensor::zeros({1, 3}, true)), dec(embed_dim, embed_dim, num_classes, rng) {}

Tensor WeightedAvgFusion::fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) {
  Tensor w = softmax_rows(logits);
  Tensor mixed = add(add(scale_by(xa, slice_col(w, 0)), scale_by(xv, slice_col(w, 1))),
                     scale_by(xl, slice_col(w, 2)));
  return dec.forward(mixed);
}

std::array<double, 3> WeightedAvgFusion::mixture_weights() const {
  Tensor w = softmax_rows(logits);
  return {w.values()[0], w.values()[1], w.values()[2]};
}

std::vector<NamedParam> WeightedAvgFusion::named_params() const {
  std::vector<NamedParam> out;
  out.push_back({"weighted_avg.logits", logits});
  dec.collect_params(out, "weighted_avg.dec");
  return out;
}

// -- tensor fusion ------------------------------------------------------------------

TensorOuterFusion::TensorOuterFusion(std::size_t embed_dim, std::size_t num_classes, Rng& rng) {
  if (embed_dim > kMaxEmbedDim) {
    throw std::invalid_argument("tensor fusion: embed_dim " + std::to_string(embed_dim) +
                                " exceeds limit " + std::to_string(kMaxEmbedDim) +
                                " ((k+1)^3 blowup)");
  }
  const std::size_t cube = (embed_dim + 1) * (embed_dim + 1) * (embed_dim + 1);
  dec = DecisionNet(cube, embed_dim, num_classes, rng);
}

Tensor TensorOuterFusion::fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) {
  Tensor za = with_one(xa), zv = with_one(xv), zl = with_one(xl);
  return dec.forward(pairwise_outer(pairwise_outer(za, zv), zl));
}

std::vector<NamedParam> TensorOuterFusion::named_params() const {
  std::vector<NamedParam> out;
  dec.collect_params(out, "tensor.dec");
  return out;
}

// -- low-rank fusion -----------------------------------------------------------------

LmfFusion::LmfFusion(std::size_t embed_dim, std::size_t num_classes, std::size_t rank, Rng& rng) {
  if (rank == 0) throw std::invalid_argument("lmf: rank must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(embed_dim + 1 + num_classes));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto make_factor = [&] {
    std::vector<double> w((embed_dim + 1) * num_classes);
    for (auto& v : w) v = dist(rng);
    return Tensor::from({num_classes, embed_dim + 1}, std::move(w), true);
  };
  for (std::size_t i = 0; i < rank; ++i) {
    factors_a.push_back(make_factor());
    factors_v.push_back(make_factor());
    factors_l.push_back(make_factor());
  }
}

Tensor LmfFusion::scores(const Tensor& xa, const Tensor& xv, const Tensor& xl) const {
  Tensor za = with_one(xa), zv = with_one(xv), zl = with_one(xl);
  Tensor acc;
  for (std::size_t i = 0; i < factors_a.size(); ++i) {
    Tensor term = mul(mul(matmul_t(za, factors_a[i]), matmul_t(zv, factors_v[i])),
                      matmul_t(zl, factors_l[i]));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor LmfFusion::fuse(const Tensor& xa, const Tensor& xv, const Tensor& xl) {
  return softmax_rows(scores(xa, xv, xl));
}

std::vector<NamedParam> LmfFusion::named_params() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < factors_a.size(); ++i) {
    out.push_back({"lmf.a." + std::to_string(i), factors_a[i]});
    out.push_back({"lmf.v." + std::to_string(i), factors_v[i]});
    out.push_back({"lmf.l." + std::to_string(i), factors_l[i]});
  }
  return out;
}

std::unique_ptr<Fusion> make_fusion(FusionKind kind, std::size_t embed_dim,
                                    std::size_t num_classes, const FusionOptions& options,
                                    Rng& rng) {
  switch (kind) {
    case FusionKind::Gfn:
      return std::make_unique<GraphFusion>(embed_dim, num_classes, options.gfn, rng);
    case FusionKind::ConcatFc:
      return std::make_unique<ConcatFcFusion>(embed_dim, num_classes, rng);
    case FusionKind::MultFc:
      return std::make_unique<MultFcFusion>(embed_dim, num_classes, rng);
    case FusionKind::WeightedAvg:
      return std::make_unique<WeightedAvgFusion>(embed_dim, num_classes, rng);
    case FusionKind::TensorOuter:
      return std::make_unique<TensorOuterFusion>(embed_dim, num_classes, rng);
    case FusionKind::Lmf:
      return std::make_unique<LmfFusion>(embed_dim, num_classes, options.lmf_rank, rng);
  }
  throw std::invalid_argument("make_fusion: unknown kind");
}

}  // namespace argf
