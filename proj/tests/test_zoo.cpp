#include <doctest.h>

#include <cmath>

#include "argf/zoo.hpp"
#include "oracles.hpp"

using namespace argf;

namespace {

Tensor rand_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor::from({rows, cols}, v);
}

}  // namespace

TEST_CASE("all strategies map three k-dim embeddings to an N-distribution") {
  Rng rng(61);
  FusionOptions options;
  options.lmf_rank = 3;
  for (FusionKind kind : all_fusion_kinds()) {
    Rng srng(62);
    auto fusion = make_fusion(kind, 6, 4, options, srng);
    Tensor out = fusion->fuse(rand_tensor(3, 6, rng), rand_tensor(3, 6, rng),
                              rand_tensor(3, 6, rng));
    CAPTURE(fusion->kind());
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 4);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 4; ++c) sum += out.values()[r * 4 + c];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("multiplicative fusion treats all-ones as identity") {
  Rng rng(63);
  MultFcFusion fusion(5, 2, rng);
  Tensor xv = rand_tensor(3, 5, rng);
  Tensor xl = rand_tensor(3, 5, rng);
  Tensor ones = Tensor::full({3, 5}, 1.0);
  Tensor with_ones = fusion.fuse(ones, xv, xl);
  Tensor direct = fusion.dec.forward(mul(xv, xl));
  CHECK(with_ones.values() == direct.values());
}

TEST_CASE("weighted average weights sum to one") {
  Rng rng(64);
  WeightedAvgFusion fusion(4, 2, rng);
  fusion.logits.set_values({0.3, -1.2, 2.0});
  const auto w = fusion.mixture_weights();
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : w) CHECK(x > 0.0);
}

TEST_CASE("tensor fusion rejects k over 16") {
  Rng rng(65);
  CHECK_THROWS_WITH_AS(TensorOuterFusion(17, 2, rng), doctest::Contains("16"),
                       std::invalid_argument);
  CHECK_NOTHROW(TensorOuterFusion(4, 2, rng));
}

TEST_CASE("tensor fusion consumes the full outer product") {
  Rng rng(66);
  TensorOuterFusion fusion(2, 2, rng);
  // With k=2 the flattened cube has 27 entries; check the dec input width.
  CHECK(fusion.dec.l1.in_dim() == 27);
  Tensor out = fusion.fuse(rand_tensor(2, 2, rng), rand_tensor(2, 2, rng), rand_tensor(2, 2, rng));
  CHECK(out.cols() == 2);
}

TEST_CASE("lmf equals the explicit tensor contraction") {
  constexpr std::size_t B = 4, k = 3, N = 2, r = 4;
  Rng rng(67);
  LmfFusion lmf(k, N, r, rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor xa = rand_tensor(B, k, rng);
    Tensor xv = rand_tensor(B, k, rng);
    Tensor xl = rand_tensor(B, k, rng);
    const auto oracle =
        oracles::lmf_contraction(lmf, xa.values(), xv.values(), xl.values(), B, k, N);
    Tensor scores = lmf.scores(xa, xv, xl);
    REQUIRE(scores.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(std::fabs(scores.values()[i] - oracle[i]) < 1e-8);
    }
  }
}

TEST_CASE("lmf decision is the softmax of the scores") {
  Rng rng(68);
  LmfFusion lmf(3, 3, 2, rng);
  Tensor xa = rand_tensor(2, 3, rng);
  Tensor xv = rand_tensor(2, 3, rng);
  Tensor xl = rand_tensor(2, 3, rng);
  Tensor m = lmf.fuse(xa, xv, xl);
  Tensor expected = softmax_rows(lmf.scores(xa, xv, xl));
  CHECK(m.values() == expected.values());
}
