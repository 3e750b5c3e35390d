#include "argf/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "argf/gfn.hpp"
#include "argf/model.hpp"
#include "argf/nn.hpp"
#include "argf/zoo.hpp"

namespace argf {

namespace {

constexpr double kRelFloor = 1e-3;

Tensor random_leaf(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad = true,
                   double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor::from({rows, cols}, std::move(v), requires_grad);
}

Tensor onehot_rows(std::size_t rows, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, classes - 1);
  std::vector<double> v(rows * classes, 0.0);
  for (std::size_t r = 0; r < rows; ++r) v[r * classes + dist(rng)] = 1.0;
  return Tensor::from({rows, classes}, std::move(v));
}

}  // namespace

double fd_max_rel_err(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& params,
                      double eps) {
  // backward() only resets grads of nodes reachable from the loss; params
  // that do not enter this loss keep stale grads unless cleared here.
  for (const auto& p : params) {
    Tensor handle = p;
    handle.zero_grad();
  }
  Tensor loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double old = p.values()[i];
      p.values()[i] = old + eps;
      const double lp = loss_fn().item();
      p.values()[i] = old - eps;
      const double lm = loss_fn().item();
      p.values()[i] = old;
      const double fd = (lp - lm) / (2.0 * eps);
      const double g = analytic[k][i];
      const double denom = std::max({std::fabs(fd), std::fabs(g), kRelFloor});
      worst = std::max(worst, std::fabs(fd - g) / denom);
    }
  }
  return worst;
}

namespace {

struct SuiteBuilder {
  std::vector<GradCheck> checks;
  double eps, tol;

  void add(const std::string& name, const std::function<Tensor()>& loss_fn,
           const std::vector<Tensor>& params) {
    GradCheck c;
    c.name = name;
    c.max_rel_err = fd_max_rel_err(loss_fn, params, eps);
    for (const auto& p : params) c.checked += p.size();
    c.pass = c.max_rel_err < tol;
    checks.push_back(std::move(c));
  }
};

}  // namespace

std::vector<GradCheck> gradcheck_all(double eps, double tol) {
  SuiteBuilder suite{{}, eps, tol};
  constexpr std::size_t B = 3, d = 4, k = 5, N = 3;

  // Dense layers, one suite per activation kind. The loss projects the
  // output with a fixed random tensor so softmax rows see non-uniform
  // upstream gradients.
  for (Activation act : {Activation::Linear, Activation::Sigmoid, Activation::Tanh,
                         Activation::LeakyRelu, Activation::Softmax}) {
    Rng rng(100 + static_cast<std::size_t>(act));
    DenseLayer layer(d, N, act, rng);
    Tensor x = random_leaf(B, d, rng);
    Tensor proj = random_leaf(B, N, rng, false);
    suite.add("dense_" + activation_name(act),
              [&layer, x, proj] { return mean_all(mul(dense_forward(layer, x), proj)); },
              {layer.weight, layer.bias, x});
  }

  {
    Rng rng(7);
    DenseLayer l1(d, k, Activation::LeakyRelu, rng);
    DenseLayer l2(k, N, Activation::Tanh, rng);
    Tensor x = random_leaf(B, d, rng);
    Tensor proj = random_leaf(B, N, rng, false);
    suite.add("two_layer_net",
              [&l1, &l2, x, proj] {
                return mean_all(mul(dense_forward(l2, dense_forward(l1, x)), proj));
              },
              {l1.weight, l1.bias, l2.weight, l2.bias, x});
  }

  // Embedding-stage modules and losses.
  {
    Rng rng(11);
    EmbeddingStage stage(d, k, N, Modality::Language, rng);
    Tensor xa = random_leaf(B, d, rng);
    Tensor xv = random_leaf(B, d, rng);
    Tensor xl = random_leaf(B, d, rng);
    Tensor proj_k = random_leaf(B, k, rng, false);
    Tensor proj_d = random_leaf(B, d, rng, false);
    Tensor proj_1 = random_leaf(B, 1, rng, false);
    Tensor proj_n = random_leaf(B, N, rng, false);
    Tensor y = onehot_rows(B, N, rng);

    auto enc_params = stage.encoder_params();
    {
      std::vector<Tensor> params = {xa};
      auto ea = stage.encoder_params();  // all encoders; only a's grads are nonzero
      params.insert(params.end(), ea.begin(), ea.end());
      suite.add("encoder",
                [&stage, xa, proj_k] {
                  return mean_all(mul(stage.encode(xa, Modality::Acoustic), proj_k));
                },
                params);
    }
    {
      Tensor e = random_leaf(B, k, rng);
      std::vector<Tensor> params = {e};
      auto dp = stage.decoder_params();
      params.insert(params.end(), dp.begin(), dp.end());
      suite.add("decoder",
                [&stage, e, proj_d] {
                  return mean_all(mul(stage.decode(e, Modality::Visual), proj_d));
                },
                params);
    }
    {
      Tensor e = random_leaf(B, k, rng);
      std::vector<Tensor> params = {e};
      auto dp = stage.discriminator_params();
      params.insert(params.end(), dp.begin(), dp.end());
      suite.add("discriminator",
                [&stage, e, proj_1] { return mean_all(mul(stage.discriminate(e), proj_1)); },
                params);
    }
    {
      Tensor e = random_leaf(B, k, rng);
      std::vector<Tensor> params = {e};
      auto cp = stage.classifier_params();
      params.insert(params.end(), cp.begin(), cp.end());
      suite.add("classifier",
                [&stage, e, proj_n] { return mean_all(mul(stage.classify(e), proj_n)); }, params);
    }
    {
      // fal through the source encoders and the discriminator.
      std::vector<Tensor> params = {xa, xv, stage.adv_weight()};
      params.insert(params.end(), enc_params.begin(), enc_params.end());
      auto dp = stage.discriminator_params();
      params.insert(params.end(), dp.begin(), dp.end());
      suite.add("loss_fal",
                [&stage, xa, xv] {
                  return loss_fal(stage, stage.encode(xa, Modality::Acoustic),
                                  stage.encode(xv, Modality::Visual));
                },
                params);
    }
    {
      // tal over leaf embeddings, the way phase 2 sees them.
      Tensor et = random_leaf(B, k, rng);
      Tensor e1 = random_leaf(B, k, rng);
      Tensor e2 = random_leaf(B, k, rng);
      std::vector<Tensor> params = {et, e1, e2, stage.adv_weight()};
      auto dp = stage.discriminator_params();
      params.insert(params.end(), dp.begin(), dp.end());
      suite.add("loss_tal", [&stage, et, e1, e2] { return loss_tal(stage, et, e1, e2); }, params);
    }
    {
      std::array<Tensor, 3> recon = {random_leaf(B, d, rng), random_leaf(B, d, rng),
                                     random_leaf(B, d, rng)};
      std::array<Tensor, 3> orig = {random_leaf(B, d, rng), random_leaf(B, d, rng),
                                    random_leaf(B, d, rng)};
      suite.add("loss_rl", [recon, orig] { return loss_rl(recon, orig); },
                {recon[0], recon[1], recon[2], orig[0], orig[1], orig[2]});
    }
    {
      std::array<Tensor, 3> e = {random_leaf(B, k, rng), random_leaf(B, k, rng),
                                 random_leaf(B, k, rng)};
      std::vector<Tensor> params = {e[0], e[1], e[2]};
      auto cp = stage.classifier_params();
      params.insert(params.end(), cp.begin(), cp.end());
      suite.add("loss_cl",
                [&stage, e, y] {
                  std::array<Tensor, 3> preds = {stage.classify(e[0]), stage.classify(e[1]),
                                                 stage.classify(e[2])};
                  return loss_cl(preds, y);
                },
                params);
    }
  }

  // GFN blocks.
  {
    Rng rng(23);
    GraphFusion gfn(k, N, {}, rng);
    Tensor va = random_leaf(B, k, rng);
    Tensor vv = random_leaf(B, k, rng);
    Tensor vl = random_leaf(B, k, rng);
    Tensor proj_1 = random_leaf(B, 1, rng, false);
    Tensor proj_k = random_leaf(B, k, rng, false);
    Tensor proj_n = random_leaf(B, N, rng, false);
    Tensor y = onehot_rows(B, N, rng);

    suite.add("man",
              [&gfn, va, proj_1] { return mean_all(mul(dense_forward(gfn.man, va), proj_1)); },
              {gfn.man.weight, gfn.man.bias, va});
    suite.add("mlp2",
              [&gfn, va, vv, proj_k] { return mean_all(mul(gfn.mlp2[0].forward(va, vv), proj_k)); },
              {gfn.mlp2[0].l1.weight, gfn.mlp2[0].l1.bias, gfn.mlp2[0].l2.weight,
               gfn.mlp2[0].l2.bias, va, vv});
    suite.add("mlp3",
              [&gfn, va, vl, proj_k] { return mean_all(mul(gfn.mlp3[0].forward(va, vl), proj_k)); },
              {gfn.mlp3[0].l1.weight, gfn.mlp3[0].l1.bias, gfn.mlp3[0].l2.weight,
               gfn.mlp3[0].l2.bias, va, vl});
    {
      Tensor omega = random_leaf(B, 3 * k, rng);
      suite.add("dec",
                [&gfn, omega, proj_n] { return mean_all(mul(gfn.dec.forward(omega), proj_n)); },
                {gfn.dec.l1.weight, gfn.dec.l1.bias, gfn.dec.l2.weight, gfn.dec.l2.bias,
                 gfn.dec.l3.weight, gfn.dec.l3.bias, omega});
    }
    {
      std::vector<Tensor> params = {va, vv, vl};
      for (const auto& np : gfn.named_params()) params.push_back(np.tensor);
      suite.add("similarity_weights",
                [&gfn, va, vv, vl, proj_k] {
                  auto g = gfn.forward(va, vv, vl);
                  return mean_all(mul(g.trimodal, proj_k));
                },
                params);
      suite.add("gfn_mse", [&gfn, va, vv, vl, y] { return mse_loss(gfn.fuse(va, vv, vl), y); },
                params);
    }
  }

  // Fusion strategy zoo.
  {
    Rng rng(31);
    Tensor xa = random_leaf(B, k, rng);
    Tensor xv = random_leaf(B, k, rng);
    Tensor xl = random_leaf(B, k, rng);
    Tensor y = onehot_rows(B, N, rng);
    FusionOptions options;
    options.lmf_rank = 3;
    for (FusionKind kind : all_fusion_kinds()) {
      Rng srng(41 + static_cast<std::size_t>(kind));
      auto fusion = make_fusion(kind, k, N, options, srng);
      std::vector<Tensor> params = {xa, xv, xl};
      for (const auto& np : fusion->named_params()) params.push_back(np.tensor);
      suite.add("zoo_" + fusion->kind(),
                [&fusion, xa, xv, xl, y] { return mse_loss(fusion->fuse(xa, xv, xl), y); },
                params);
    }
  }

  // Whole pipeline: encoders -> GFN -> task MSE.
  {
    Rng rng(53);
    EmbeddingStage stage(d, k, N, Modality::Language, rng);
    GraphFusion gfn(k, N, {}, rng);
    Tensor xa = random_leaf(B, d, rng);
    Tensor xv = random_leaf(B, d, rng);
    Tensor xl = random_leaf(B, d, rng);
    Tensor y = onehot_rows(B, N, rng);
    std::vector<Tensor> params = {xa, xv, xl};
    auto enc = stage.encoder_params();
    params.insert(params.end(), enc.begin(), enc.end());
    for (const auto& np : gfn.named_params()) params.push_back(np.tensor);
    suite.add("full_model_mse",
              [&stage, &gfn, xa, xv, xl, y] {
                Tensor ea = stage.encode(xa, Modality::Acoustic);
                Tensor ev = stage.encode(xv, Modality::Visual);
                Tensor el = stage.encode(xl, Modality::Language);
                return mse_loss(gfn.fuse(ea, ev, el), y);
              },
              params);
  }

  return suite.checks;
}

std::string gradcheck_table(const std::vector<GradCheck>& checks) {
  std::ostringstream os;
  char buf[160];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof(buf), "%-22s %-4s max_rel_err=%.3e (%zu entries)\n",
                  c.name.c_str(), c.pass ? "ok" : "FAIL", c.max_rel_err, c.checked);
    os << buf;
  }
  return os.str();
}

bool gradcheck_passed(const std::vector<GradCheck>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return !checks.empty();
}

}  // namespace argf
