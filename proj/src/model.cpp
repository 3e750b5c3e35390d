#include "argf/model.hpp"

#include <cmath>
#include <sstream>

namespace argf {

char modality_tag(Modality m) {
  switch (m) {
    case Modality::Acoustic: return 'a';
    case Modality::Visual: return 'v';
    case Modality::Language: return 'l';
  }
  return '?';
}

Modality modality_from_tag(char tag) {
  switch (tag) {
    case 'a': return Modality::Acoustic;
    case 'v': return Modality::Visual;
    case 'l': return Modality::Language;
    default: throw std::invalid_argument(std::string("unknown modality tag: ") + tag);
  }
}

void TwoDense::collect_params(std::vector<NamedParam>& out, const std::string& prefix) const {
  append_params(out, prefix + ".l1", l1);
  append_params(out, prefix + ".l2", l2);
}

bool LossBreakdown::finite() const {
  return std::isfinite(fal) && std::isfinite(tal) && std::isfinite(rl) && std::isfinite(cl) &&
         std::isfinite(total);
}

std::string LossBreakdown::str() const {
  std::ostringstream os;
  os << "fal=" << fal << " tal=" << tal << " rl=" << rl << " cl=" << cl << " total=" << total;
  return os.str();
}

EmbeddingStage::EmbeddingStage(std::size_t input_dim, std::size_t embed_dim,
                               std::size_t num_classes, Modality target, Rng& rng)
    : input_dim_(input_dim), embed_dim_(embed_dim), num_classes_(num_classes), target_(target) {
  for (Modality m : kModalities) {
    auto& enc = encoders_[index_of(m)];
    enc.l1 = DenseLayer(input_dim, embed_dim, Activation::LeakyRelu, rng);
    enc.l2 = DenseLayer(embed_dim, embed_dim, Activation::Tanh, rng);
    auto& dec = decoders_[index_of(m)];
    dec.l1 = DenseLayer(embed_dim, embed_dim, Activation::LeakyRelu, rng);
    dec.l2 = DenseLayer(embed_dim, input_dim, Activation::Linear, rng);
  }
  discriminator_.l1 = DenseLayer(embed_dim, embed_dim, Activation::LeakyRelu, rng);
  discriminator_.l2 = DenseLayer(embed_dim, 1, Activation::Sigmoid, rng);
  classifier_ = DenseLayer(embed_dim, num_classes, Activation::Softmax, rng);
  adv_weight_ = Tensor::scalar(1.0, true);
}

Tensor EmbeddingStage::encode(const Tensor& x, Modality m) const {
  if (x.cols() != input_dim_) {
    throw std::invalid_argument("encode: input " + shape_str(x) + " does not match feature dim " +
                                std::to_string(input_dim_));
  }
  return encoders_[index_of(m)].forward(x);
}

Tensor EmbeddingStage::decode(const Tensor& embedded, Modality m) const {
  if (embedded.cols() != embed_dim_) {
    throw std::invalid_argument("decode: input " + shape_str(embedded) +
                                " does not match embedding dim " + std::to_string(embed_dim_));
  }
  return decoders_[index_of(m)].forward(embedded);
}

Tensor EmbeddingStage::discriminate(const Tensor& embedded) const {
  if (embedded.cols() != embed_dim_) {
    throw std::invalid_argument("discriminate: input " + shape_str(embedded) +
                                " does not match embedding dim " + std::to_string(embed_dim_));
  }
  return discriminator_.forward(embedded);
}

Tensor EmbeddingStage::classify(const Tensor& embedded) const {
  if (embedded.cols() != embed_dim_) {
    throw std::invalid_argument("classify: input " + shape_str(embedded) +
                                " does not match embedding dim " + std::to_string(embed_dim_));
  }
  return dense_forward(classifier_, embedded);
}

std::array<Modality, 2> EmbeddingStage::sources() const {
  std::array<Modality, 2> out{};
  std::size_t j = 0;
  for (Modality m : kModalities) {
    if (m != target_) out[j++] = m;
  }
  return out;
}

void EmbeddingStage::clamp_adv_weight() { adv_weight_.clamp_values(0.1, 10.0); }

std::vector<NamedParam> EmbeddingStage::named_params() const {
  std::vector<NamedParam> out;
  for (Modality m : kModalities) {
    const std::string tag(1, modality_tag(m));
    encoders_[index_of(m)].collect_params(out, "encoder_" + tag);
    decoders_[index_of(m)].collect_params(out, "decoder_" + tag);
  }
  discriminator_.collect_params(out, "discriminator");
  append_params(out, "classifier", classifier_);
  out.push_back({"adv_weight", adv_weight_});
  return out;
}

std::vector<Tensor> EmbeddingStage::encoder_params() const {
  std::vector<Tensor> out;
  for (const auto& enc : encoders_) {
    for (const auto& t : {enc.l1.weight, enc.l1.bias, enc.l2.weight, enc.l2.bias}) out.push_back(t);
  }
  return out;
}

std::vector<Tensor> EmbeddingStage::decoder_params() const {
  std::vector<Tensor> out;
  for (const auto& dec : decoders_) {
    for (const auto& t : {dec.l1.weight, dec.l1.bias, dec.l2.weight, dec.l2.bias}) out.push_back(t);
  }
  return out;
}

std::vector<Tensor> EmbeddingStage::discriminator_params() const {
  return {discriminator_.l1.weight, discriminator_.l1.bias, discriminator_.l2.weight,
          discriminator_.l2.bias};
}

std::vector<Tensor> EmbeddingStage::classifier_params() const {
  return {classifier_.weight, classifier_.bias};
}

// -- losses -------------------------------------------------------------------

Tensor loss_fal(const EmbeddingStage& stage, const Tensor& e_src1, const Tensor& e_src2) {
  Tensor sum = add(mean_all(clamped_log(stage.discriminate(e_src1))),
                   mean_all(clamped_log(stage.discriminate(e_src2))));
  return neg(scale_by(sum, stage.adv_weight()));
}

Tensor loss_tal(const EmbeddingStage& stage, const Tensor& e_tgt, const Tensor& e_src1,
                const Tensor& e_src2) {
  auto one_minus = [](const Tensor& d) { return add_scalar(neg(d), 1.0); };
  Tensor sum = add(add(mean_all(clamped_log(one_minus(stage.discriminate(e_src1)))),
                       mean_all(clamped_log(one_minus(stage.discriminate(e_src2))))),
                   mean_all(clamped_log(stage.discriminate(e_tgt))));
  return neg(scale_by(sum, stage.adv_weight()));
}

Tensor loss_rl(const std::array<Tensor, 3>& reconstructed, const std::array<Tensor, 3>& original) {
  Tensor total;
  for (std::size_t m = 0; m < 3; ++m) {
    Tensor term = mean_all(row_l2norm(sub(reconstructed[m], original[m])));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

Tensor loss_cl(const std::array<Tensor, 3>& predictions, const Tensor& y_onehot) {
  Tensor total;
  for (std::size_t m = 0; m < 3; ++m) {
    Tensor term = mean_all(row_l2norm(sub(predictions[m], y_onehot)));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

// -- three-phase trainer --------------------------------------------------------

namespace {

std::vector<Tensor> concat_params(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

StageTrainer::StageTrainer(EmbeddingStage& stage, double learning_rate, AblationFlags ablation)
    : stage_(stage),
      ablation_(ablation),
      opt_encdec_(concat_params(concat_params(stage.encoder_params(), stage.decoder_params()),
                                {stage.adv_weight()}),
                  learning_rate),
      opt_disc_(concat_params(stage.discriminator_params(), {stage.adv_weight()}), learning_rate),
      opt_cls_(concat_params(stage.encoder_params(), stage.classifier_params()), learning_rate) {}

namespace {

void check_finite(double v, const char* name, const LossBreakdown& lb) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string("non-finite ") + name + " loss; " + lb.str(), lb);
  }
}

}  // namespace

void StageTrainer::phase_encoders_decoders(const ModalityBatch& batch, double lambda,
                                           LossBreakdown& out) {
  if (ablation_.no_adv && ablation_.no_decoder) return;
  const auto src = stage_.sources();
  Tensor fal, rl;
  if (!ablation_.no_adv) {
    Tensor e1 = stage_.encode(batch.features(src[0]), src[0]);
    Tensor e2 = stage_.encode(batch.features(src[1]), src[1]);
    fal = loss_fal(stage_, e1, e2);
    out.fal = fal.item();
    check_finite(out.fal, "fal", out);
  }
  if (!ablation_.no_decoder) {
    std::array<Tensor, 3> recon, orig;
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      orig[i] = batch.features(m);
      recon[i] = stage_.decode(stage_.encode(orig[i], m), m);
    }
    rl = loss_rl(recon, orig);
    out.rl = rl.item();
    check_finite(out.rl, "rl", out);
  }
  Tensor objective;
  if (!fal.defined()) {
    objective = scale(rl, 1.0 - lambda);
  } else if (!rl.defined()) {
    objective = scale(fal, lambda);
  } else {
    objective = add(scale(fal, lambda), scale(rl, 1.0 - lambda));
  }
  backward(objective);
  opt_encdec_.step();
  stage_.clamp_adv_weight();
}

void StageTrainer::phase_discriminator(const ModalityBatch& batch, LossBreakdown& out) {
  if (ablation_.no_adv) return;
  const auto src = stage_.sources();
  const Modality tgt = stage_.target();
  Tensor et = stage_.encode(batch.features(tgt), tgt).detach();
  Tensor e1 = stage_.encode(batch.features(src[0]), src[0]).detach();
  Tensor e2 = stage_.encode(batch.features(src[1]), src[1]).detach();
  Tensor tal = loss_tal(stage_, et, e1, e2);
  out.tal = tal.item();
  check_finite(out.tal, "tal", out);
  backward(scale(tal, 0.5));
  opt_disc_.step();
  stage_.clamp_adv_weight();
}

void StageTrainer::phase_classifier(const ModalityBatch& batch, LossBreakdown& out) {
  if (ablation_.no_classifier) return;
  std::array<Tensor, 3> preds;
  for (Modality m : kModalities) {
    const std::size_t i = index_of(m);
    preds[i] = stage_.classify(stage_.encode(batch.features(m), m));
  }
  Tensor cl = loss_cl(preds, batch.y);
  out.cl = cl.item();
  check_finite(out.cl, "cl", out);
  backward(cl);
  opt_cls_.step();
}

LossBreakdown StageTrainer::train_step(const ModalityBatch& batch, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("train_step: lambda must be in [0,1], got " +
                                std::to_string(lambda));
  }
  LossBreakdown lb;
  phase_encoders_decoders(batch, lambda, lb);
  phase_discriminator(batch, lb);
  phase_classifier(batch, lb);
  lb.total = lambda * lb.fal + (1.0 - lambda) * lb.rl + 0.5 * lb.tal + lb.cl;
  return lb;
}

}  // namespace argf
