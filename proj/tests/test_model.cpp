#include <doctest.h>

#include <cmath>

#include "argf/data.hpp"
#include "argf/model.hpp"

using namespace argf;

namespace {

constexpr double kLn2 = 0.6931471805599453;

Tensor rand_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor::from({rows, cols}, v);
}

void zero_params(const std::vector<Tensor>& params) {
  for (const auto& p : params) {
    Tensor handle = p;
    handle.set_values(std::vector<double>(p.size(), 0.0));
  }
}

ModalityBatch random_batch(std::size_t B, std::size_t d, std::size_t N, Rng& rng) {
  ModalityBatch batch;
  for (std::size_t m = 0; m < 3; ++m) batch.x[m] = rand_tensor(B, d, rng);
  std::vector<double> y(B * N, 0.0);
  std::uniform_int_distribution<std::size_t> cls(0, N - 1);
  for (std::size_t r = 0; r < B; ++r) {
    const std::size_t c = cls(rng);
    y[r * N + c] = 1.0;
    batch.labels.push_back(static_cast<int>(c));
  }
  batch.y = Tensor::from({B, N}, y);
  return batch;
}

ModalityBatch permuted(const ModalityBatch& batch, const std::vector<std::size_t>& order) {
  const std::size_t B = order.size();
  ModalityBatch out;
  for (std::size_t m = 0; m < 3; ++m) {
    const std::size_t d = batch.x[m].cols();
    std::vector<double> x(B * d);
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < d; ++c) x[r * d + c] = batch.x[m].values()[order[r] * d + c];
    }
    out.x[m] = Tensor::from({B, d}, x);
  }
  const std::size_t N = batch.y.cols();
  std::vector<double> y(B * N);
  for (std::size_t r = 0; r < B; ++r) {
    out.labels.push_back(batch.labels[order[r]]);
    for (std::size_t c = 0; c < N; ++c) y[r * N + c] = batch.y.values()[order[r] * N + c];
  }
  out.y = Tensor::from({B, N}, y);
  return out;
}

}  // namespace

TEST_CASE("sources are the two non-target modalities in fixed order") {
  Rng rng(4);
  EmbeddingStage sl(8, 4, 2, Modality::Language, rng);
  CHECK(sl.sources() == std::array<Modality, 2>{Modality::Acoustic, Modality::Visual});
  EmbeddingStage sa(8, 4, 2, Modality::Acoustic, rng);
  CHECK(sa.sources() == std::array<Modality, 2>{Modality::Visual, Modality::Language});
  EmbeddingStage sv(8, 4, 2, Modality::Visual, rng);
  CHECK(sv.sources() == std::array<Modality, 2>{Modality::Acoustic, Modality::Language});
}

TEST_CASE("encode contract") {
  Rng rng(5);
  EmbeddingStage stage(16, 8, 2, Modality::Language, rng);

  SUBCASE("shape") {
    Tensor e = stage.encode(rand_tensor(4, 16, rng), Modality::Acoustic);
    CHECK(e.rows() == 4);
    CHECK(e.cols() == 8);
  }
  SUBCASE("zero parameters give zero embeddings") {
    zero_params(stage.encoder_params());
    Tensor e = stage.encode(rand_tensor(4, 16, rng), Modality::Visual);
    for (double v : e.values()) CHECK(v == 0.0);
  }
  SUBCASE("deterministic across calls") {
    Tensor x = rand_tensor(3, 16, rng);
    CHECK(stage.encode(x, Modality::Language).values() ==
          stage.encode(x, Modality::Language).values());
  }
  SUBCASE("dim mismatch rejected") {
    CHECK_THROWS_AS(stage.encode(rand_tensor(3, 7, rng), Modality::Acoustic),
                    std::invalid_argument);
  }
}

TEST_CASE("decode contract") {
  Rng rng(6);
  EmbeddingStage stage(16, 8, 2, Modality::Language, rng);
  Tensor e = rand_tensor(4, 8, rng);
  Tensor x = stage.decode(e, Modality::Acoustic);
  CHECK(x.rows() == 4);
  CHECK(x.cols() == 16);
  zero_params(stage.decoder_params());
  for (double v : stage.decode(e, Modality::Acoustic).values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(stage.decode(rand_tensor(4, 5, rng), Modality::Visual), std::invalid_argument);
}

TEST_CASE("discriminator outputs 0.5 with zero params and stays in (0,1)") {
  Rng rng(7);
  EmbeddingStage stage(16, 8, 2, Modality::Language, rng);
  SUBCASE("zero params") {
    zero_params(stage.discriminator_params());
    for (double v : stage.discriminate(rand_tensor(5, 8, rng)).values()) {
      CHECK(v == doctest::Approx(0.5));
    }
  }
  SUBCASE("bounded on huge inputs") {
    Tensor big = scale(rand_tensor(5, 8, rng), 1e3);
    for (double v : stage.discriminate(big).values()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("classifier rows sum to one; zero params give uniform") {
  Rng rng(8);
  EmbeddingStage stage(16, 8, 2, Modality::Language, rng);
  Tensor e = rand_tensor(6, 8, rng);
  Tensor yhat = stage.classify(e);
  CHECK(yhat.rows() == 6);
  CHECK(yhat.cols() == 2);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(yhat.values()[r * 2] + yhat.values()[r * 2 + 1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  zero_params(stage.classifier_params());
  for (double v : stage.classify(e).values()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("loss anchors at D == 0.5 and w == 1") {
  Rng rng(9);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  zero_params(stage.discriminator_params());  // sigmoid(0) = 0.5 exactly
  Tensor e1 = rand_tensor(5, 4, rng);
  Tensor e2 = rand_tensor(5, 4, rng);
  Tensor et = rand_tensor(5, 4, rng);

  CHECK(loss_fal(stage, e1, e2).item() == doctest::Approx(2.0 * kLn2).epsilon(1e-12));
  CHECK(loss_tal(stage, et, e1, e2).item() == doctest::Approx(3.0 * kLn2).epsilon(1e-12));

  SUBCASE("fal is linear in w") {
    const double base = loss_fal(stage, e1, e2).item();
    stage.adv_weight().set_values({2.0});
    CHECK(loss_fal(stage, e1, e2).item() == doctest::Approx(2.0 * base).epsilon(1e-12));
  }
}

TEST_CASE("adversarial losses behave at saturation") {
  Rng rng(10);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  zero_params(stage.discriminator_params());
  Tensor e1 = rand_tensor(5, 4, rng);
  Tensor e2 = rand_tensor(5, 4, rng);
  Tensor et = rand_tensor(5, 4, rng);

  // Saturate D to 1 via a huge output bias: fal -> 0+, and everything stays
  // finite thanks to the log clamp.
  auto params = stage.discriminator_params();
  Tensor out_bias = params[3];
  out_bias.set_values({500.0});
  const double near_zero = loss_fal(stage, e1, e2).item();
  CHECK(near_zero > 0.0);
  CHECK(near_zero < 1e-5);
  CHECK(std::isfinite(loss_tal(stage, et, e1, e2).item()));

  out_bias.set_values({-500.0});
  CHECK(std::isfinite(loss_fal(stage, e1, e2).item()));
  CHECK(std::isfinite(loss_tal(stage, et, e1, e2).item()));
}

TEST_CASE("reconstruction loss anchors") {
  Rng rng(11);
  std::array<Tensor, 3> orig = {rand_tensor(4, 6, rng), rand_tensor(4, 6, rng),
                                rand_tensor(4, 6, rng)};
  SUBCASE("perfect reconstruction is zero") {
    CHECK(loss_rl(orig, orig).item() == 0.0);
  }
  SUBCASE("unit offset per modality gives 3") {
    std::array<Tensor, 3> recon;
    for (std::size_t m = 0; m < 3; ++m) {
      std::vector<double> v = orig[m].values();
      for (std::size_t r = 0; r < 4; ++r) v[r * 6] += 1.0;  // offset by e_0
      recon[m] = Tensor::from({4, 6}, v);
    }
    CHECK(loss_rl(recon, orig).item() == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("nonnegative") {
    std::array<Tensor, 3> recon = {rand_tensor(4, 6, rng), rand_tensor(4, 6, rng),
                                   rand_tensor(4, 6, rng)};
    CHECK(loss_rl(recon, orig).item() >= 0.0);
  }
}

TEST_CASE("classification loss anchors") {
  Tensor y = Tensor::from({1, 2}, {1.0, 0.0});
  Tensor half = Tensor::from({1, 2}, {0.5, 0.5});
  std::array<Tensor, 3> preds = {half, half, half};
  SUBCASE("exact predictions give zero") {
    std::array<Tensor, 3> exact = {y, y, y};
    CHECK(loss_cl(exact, y).item() == 0.0);
  }
  SUBCASE("uniform predictions give 3*sqrt(0.5)") {
    CHECK(loss_cl(preds, y).item() == doctest::Approx(3.0 * std::sqrt(0.5)).epsilon(1e-12));
  }
  SUBCASE("consistent class permutation leaves the loss unchanged") {
    Tensor y_perm = Tensor::from({1, 2}, {0.0, 1.0});
    Tensor p = Tensor::from({1, 2}, {0.7, 0.3});
    Tensor p_perm = Tensor::from({1, 2}, {0.3, 0.7});
    std::array<Tensor, 3> a = {p, p, p};
    std::array<Tensor, 3> b = {p_perm, p_perm, p_perm};
    CHECK(loss_cl(a, y).item() == doctest::Approx(loss_cl(b, y_perm).item()).epsilon(1e-12));
  }
}

TEST_CASE("phase updates touch exactly the declared parameter sets") {
  Rng rng(12);
  EmbeddingStage stage(8, 4, 3, Modality::Language, rng);
  StageTrainer trainer(stage, 1e-3);
  ModalityBatch batch = random_batch(6, 8, 3, rng);

  auto snap = [&] {
    return snapshot_values(stage.params());
  };
  auto changed = [](const ParamSnapshot& a, const ParamSnapshot& b) {
    std::vector<bool> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] != b[i];
    return out;
  };
  // Parameter order: 3x(encoder l1 w/b, l2 w/b; decoder l1 w/b, l2 w/b),
  // then discriminator (4), classifier (2), adv weight (1) = 31 tensors.
  const std::size_t n = stage.params().size();
  REQUIRE(n == 31);
  auto is_encoder = [](std::size_t i) { return i < 24 && (i % 8) < 4; };
  auto is_decoder = [](std::size_t i) { return i < 24 && (i % 8) >= 4; };
  auto is_disc = [](std::size_t i) { return i >= 24 && i < 28; };
  auto is_cls = [](std::size_t i) { return i >= 28 && i < 30; };
  auto is_w = [n](std::size_t i) { return i == 30; };

  LossBreakdown lb;
  auto before = snap();
  trainer.phase_encoders_decoders(batch, 0.5, lb);
  auto after = snap();
  auto diff = changed(before, after);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_disc(i) || is_cls(i)) {
      CHECK_MESSAGE(!diff[i], "phase 1 must not touch tensor ", i);
    }
    if (is_encoder(i) || is_decoder(i)) {
      CHECK_MESSAGE(diff[i], "phase 1 should update tensor ", i);
    }
  }

  before = after;
  trainer.phase_discriminator(batch, lb);
  after = snap();
  diff = changed(before, after);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_disc(i) && !is_w(i)) {
      CHECK_MESSAGE(!diff[i], "phase 2 must not touch tensor ", i);
    }
    if (is_disc(i)) CHECK_MESSAGE(diff[i], "phase 2 should update tensor ", i);
  }

  before = after;
  trainer.phase_classifier(batch, lb);
  after = snap();
  diff = changed(before, after);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_encoder(i) && !is_cls(i)) {
      CHECK_MESSAGE(!diff[i], "phase 3 must not touch tensor ", i);
    }
    if (is_encoder(i) || is_cls(i)) CHECK_MESSAGE(diff[i], "phase 3 should update tensor ", i);
  }
}

TEST_CASE("lambda 0 leaves encoder grads equal to pure reconstruction grads") {
  Rng rng(13);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  ModalityBatch batch = random_batch(5, 8, 2, rng);

  auto phase1_loss = [&](bool with_fal) {
    std::array<Tensor, 3> recon, orig;
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      orig[i] = batch.features(m);
      recon[i] = stage.decode(stage.encode(orig[i], m), m);
    }
    Tensor rl = loss_rl(recon, orig);
    if (!with_fal) return rl;
    const auto src = stage.sources();
    Tensor fal = loss_fal(stage, stage.encode(batch.features(src[0]), src[0]),
                          stage.encode(batch.features(src[1]), src[1]));
    return add(scale(fal, 0.0), scale(rl, 1.0));
  };

  backward(phase1_loss(true));
  std::vector<ParamSnapshot::value_type> g1;
  for (const auto& p : stage.encoder_params()) g1.push_back(p.grad());
  backward(phase1_loss(false));
  std::vector<ParamSnapshot::value_type> g2;
  for (const auto& p : stage.encoder_params()) g2.push_back(p.grad());
  CHECK(g1 == g2);
}

TEST_CASE("no_adv ablation never computes adversarial losses or moves D") {
  Rng rng(14);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  StageTrainer trainer(stage, 1e-3, {.no_adv = true});
  const auto disc_before = snapshot_values(stage.discriminator_params());
  for (int i = 0; i < 5; ++i) {
    ModalityBatch batch = random_batch(4, 8, 2, rng);
    LossBreakdown lb = trainer.train_step(batch, 0.5);
    CHECK(lb.fal == 0.0);
    CHECK(lb.tal == 0.0);
    CHECK(lb.rl > 0.0);
  }
  CHECK(snapshot_values(stage.discriminator_params()) == disc_before);
}

TEST_CASE("losses are batch-order invariant") {
  Rng rng(15);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  ModalityBatch batch = random_batch(7, 8, 2, rng);
  std::vector<std::size_t> order = {6, 2, 4, 0, 5, 1, 3};
  ModalityBatch shuffled = permuted(batch, order);

  const auto src = stage.sources();
  auto fal_of = [&](const ModalityBatch& b) {
    return loss_fal(stage, stage.encode(b.features(src[0]), src[0]),
                    stage.encode(b.features(src[1]), src[1]))
        .item();
  };
  auto rl_of = [&](const ModalityBatch& b) {
    std::array<Tensor, 3> recon, orig;
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      orig[i] = b.features(m);
      recon[i] = stage.decode(stage.encode(orig[i], m), m);
    }
    return loss_rl(recon, orig).item();
  };
  auto cl_of = [&](const ModalityBatch& b) {
    std::array<Tensor, 3> preds;
    for (Modality m : kModalities) {
      preds[index_of(m)] = stage.classify(stage.encode(b.features(m), m));
    }
    return loss_cl(preds, b.y).item();
  };
  CHECK(fal_of(batch) == doctest::Approx(fal_of(shuffled)).epsilon(1e-12));
  CHECK(rl_of(batch) == doctest::Approx(rl_of(shuffled)).epsilon(1e-12));
  CHECK(cl_of(batch) == doctest::Approx(cl_of(shuffled)).epsilon(1e-12));
}

TEST_CASE("adv weight stays clamped inside [0.1, 10]") {
  Rng rng(16);
  EmbeddingStage stage(8, 4, 2, Modality::Language, rng);
  StageTrainer trainer(stage, 0.5);  // aggressive rate to push w around
  for (int i = 0; i < 30; ++i) {
    ModalityBatch batch = random_batch(4, 8, 2, rng);
    trainer.train_step(batch, 0.9);
    const double w = stage.adv_weight().item();
    CHECK(w >= 0.1);
    CHECK(w <= 10.0);
  }
}

TEST_CASE("reconstruction improves well below the untrained baseline") {
  // Train with lambda=0 (pure reconstruction) on an easy autoencoding task;
  // the oracle is the untrained model's own error.
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.dim = 8;
  spec.count = 64;
  spec.seed = 21;
  FeatureBundle bundle = generate_synthetic(spec);
  Rng rng(22);
  EmbeddingStage stage(8, 16, 2, Modality::Language, rng);
  StageTrainer trainer(stage, 3e-3, {.no_adv = true, .no_classifier = true});

  auto recon_error = [&] {
    std::vector<std::size_t> all(bundle.count);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ModalityBatch batch = make_batch(bundle, all);
    std::array<Tensor, 3> recon, orig;
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      orig[i] = batch.features(m);
      recon[i] = stage.decode(stage.encode(orig[i], m), m);
    }
    return loss_rl(recon, orig).item();
  };

  const double initial = recon_error();
  Batcher batcher(bundle, Split::Train, 16, 23);
  for (int epoch = 0; epoch < 300; ++epoch) {
    for (const auto& batch : batcher.epoch()) trainer.train_step(batch, 0.0);
  }
  CHECK(recon_error() < 0.2 * initial);
}

TEST_CASE("discriminator gap shrinks after adversarial training") {
  // Oracle setup: epoch-0 snapshot of |mean D(x_l^e) - mean D(x_a^e)| as
  // the baseline. The min-max needs a high adversarial weight (lambda) and
  // enough steps to settle; with this seed the gap closes about 7x.
  SyntheticSpec spec;
  spec.dim = 8;
  spec.count = 128;
  spec.seed = 31;
  FeatureBundle bundle = generate_synthetic(spec);
  Rng rng(30);
  EmbeddingStage stage(8, 6, 2, Modality::Language, rng);
  StageTrainer trainer(stage, 3e-3);

  std::vector<std::size_t> all(bundle.count);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  ModalityBatch full = make_batch(bundle, all);
  auto gap = [&] {
    double tgt = 0.0, src_mean = 0.0;
    Tensor dt = stage.discriminate(stage.encode(full.features(Modality::Language),
                                                Modality::Language));
    Tensor da = stage.discriminate(stage.encode(full.features(Modality::Acoustic),
                                                Modality::Acoustic));
    for (double v : dt.values()) tgt += v;
    for (double v : da.values()) src_mean += v;
    return std::fabs(tgt - src_mean) / static_cast<double>(bundle.count);
  };

  const double before = gap();
  Batcher batcher(bundle, Split::Train, 32, 33);
  for (int epoch = 0; epoch < 150; ++epoch) {
    for (const auto& batch : batcher.epoch()) trainer.train_step(batch, 0.9);
  }
  CHECK(gap() < 0.5 * before);
}
