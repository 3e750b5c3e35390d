#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "argf/batch.hpp"
#include "argf/nn.hpp"
#include "argf/tensor.hpp"

namespace argf {

/// Two-layer perceptron used for encoders, decoders and the discriminator.
struct TwoDense {
  DenseLayer l1, l2;

  Tensor forward(const Tensor& x) const { return dense_forward(l2, dense_forward(l1, x)); }
  void collect_params(std::vector<NamedParam>& out, const std::string& prefix) const;
};

/// Scalar loss values of one training step. Values are measured before the
/// update of the phase that minimizes them.
struct LossBreakdown {
  double fal = 0.0;  // fake adversarial loss (fools the discriminator)
  double tal = 0.0;  // true adversarial loss (trains the discriminator)
  double rl = 0.0;   // reconstruction loss
  double cl = 0.0;   // classification loss
  double total = 0.0;

  bool finite() const;
  std::string str() const;
};

/// Thrown when a loss turns non-finite; carries the measured breakdown.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, LossBreakdown breakdown)
      : std::runtime_error(what), breakdown(breakdown) {}
  LossBreakdown breakdown;
};

struct AblationFlags {
  bool no_adv = false;
  bool no_decoder = false;
  bool no_classifier = false;
};

/// The adversarial joint-embedding stage: three encoders into a shared
/// k-dim space, three decoders back out, a discriminator scoring
/// target-likeness, a classifier shared across modalities, and a learnable
/// adversarial weight.
class EmbeddingStage {
 public:
  EmbeddingStage(std::size_t input_dim, std::size_t embed_dim, std::size_t num_classes,
                 Modality target, Rng& rng);

  Tensor encode(const Tensor& x, Modality m) const;
  Tensor decode(const Tensor& embedded, Modality m) const;
  /// Sigmoid score in (0,1): 1 = looks like the target modality.
  Tensor discriminate(const Tensor& embedded) const;
  /// Softmax class distribution; the same parameters serve every modality.
  Tensor classify(const Tensor& embedded) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  Modality target() const { return target_; }
  /// The two non-target modalities, in (a,v,l) order.
  std::array<Modality, 2> sources() const;

  Tensor adv_weight() const { return adv_weight_; }
  /// Keeps w inside [0.1, 10]; called after every update that touches it.
  void clamp_adv_weight();

  std::vector<NamedParam> named_params() const;
  std::vector<Tensor> params() const { return tensors_of(named_params()); }
  std::vector<Tensor> encoder_params() const;
  std::vector<Tensor> decoder_params() const;
  std::vector<Tensor> discriminator_params() const;
  std::vector<Tensor> classifier_params() const;

 private:
  std::size_t input_dim_, embed_dim_, num_classes_;
  Modality target_;
  std::array<TwoDense, 3> encoders_;
  std::array<TwoDense, 3> decoders_;
  TwoDense discriminator_;
  DenseLayer classifier_;
  Tensor adv_weight_;
};

// -- losses -----------------------------------------------------------------
// All are batch means and stay on the tape.

/// -w [log D(e_src1) + log D(e_src2)]; the source encoders try to push the
/// discriminator's score toward 1.
Tensor loss_fal(const EmbeddingStage& stage, const Tensor& e_src1, const Tensor& e_src2);
/// -w [log(1 - D(e_src1)) + log(1 - D(e_src2)) + log D(e_tgt)]; callers pass
/// detached embeddings so only the discriminator (and w) receive gradient.
Tensor loss_tal(const EmbeddingStage& stage, const Tensor& e_tgt, const Tensor& e_src1,
                const Tensor& e_src2);
/// Sum over modalities of the per-sample L2 reconstruction error.
Tensor loss_rl(const std::array<Tensor, 3>& reconstructed, const std::array<Tensor, 3>& original);
/// Sum over modalities of the per-sample L2 distance to the one-hot label.
Tensor loss_cl(const std::array<Tensor, 3>& predictions, const Tensor& y_onehot);

/// Runs the three-phase update of the embedding stage:
///   1. lambda*fal + (1-lambda)*rl  ->  encoders + decoders (+w)
///   2. 0.5*tal                     ->  discriminator (+w)
///   3. cl                          ->  encoders + classifier
/// Ablation flags drop the corresponding losses and phases.
class StageTrainer {
 public:
  StageTrainer(EmbeddingStage& stage, double learning_rate, AblationFlags ablation = {});

  /// One batch through all active phases. Throws DivergenceError when a
  /// loss turns non-finite (no update is applied for that phase).
  LossBreakdown train_step(const ModalityBatch& batch, double lambda);

  // The phases individually; each measures its losses, applies its update
  // and writes the measured values into `out`. Skipped under the matching
  // ablation (no update, `out` untouched).
  void phase_encoders_decoders(const ModalityBatch& batch, double lambda, LossBreakdown& out);
  void phase_discriminator(const ModalityBatch& batch, LossBreakdown& out);
  void phase_classifier(const ModalityBatch& batch, LossBreakdown& out);

  const AblationFlags& ablation() const { return ablation_; }

 private:
  EmbeddingStage& stage_;
  AblationFlags ablation_;
  Adam opt_encdec_;
  Adam opt_disc_;
  Adam opt_cls_;
};

}  // namespace argf
