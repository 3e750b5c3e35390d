#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "argf/batch.hpp"
#include "argf/nn.hpp"

namespace argf {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// Seed of the default 70/10/20 split assignment when a bundle comes
/// without splits.csv. Fixed so a bundle always loads the same way.
inline constexpr std::uint64_t kDefaultSplitSeed = 0x9e3779b97f4a7c15ull;

/// A dataset of aligned per-modality feature vectors plus labels and a
/// train/val/test assignment. Immutable after load.
struct FeatureBundle {
  std::array<std::string, 3> modality_names{"acoustic", "visual", "language"};
  std::array<std::size_t, 3> dims{};            // equal across modalities by contract
  std::size_t num_classes = 0;
  std::size_t count = 0;
  std::array<std::vector<double>, 3> features;  // row-major count x dim
  std::vector<int> labels;                      // class ids in [0, num_classes)
  std::vector<Split> splits;

  std::size_t dim() const { return dims[0]; }
  const double* row(Modality m, std::size_t i) const {
    return features[index_of(m)].data() + i * dims[index_of(m)];
  }
  std::vector<std::size_t> indices_of(Split s) const;
  /// Checks every structural invariant; throws std::runtime_error naming
  /// the first violation.
  void validate() const;
};

struct SyntheticSpec {
  std::size_t num_classes = 2;
  std::size_t dim = 16;
  std::size_t count = 2000;
  double separation = 1.0;               // scale of the class latents
  std::array<double, 3> noise{0.3, 0.3, 0.3};
  double redundancy = 0.5;               // rho: shared vs modality-private signal
  std::uint64_t seed = 0;

  void validate() const;
};

/// Construction-time class means, kept around so tests can compare the
/// empirical statistics of a generated bundle against ground truth.
struct SyntheticModel {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  // mean[m][c] is the dim-vector mean of modality m, class c.
  std::array<std::vector<std::vector<double>>, 3> mean;

  const std::vector<double>& class_mean(Modality m, int c) const { return mean[index_of(m)][c]; }
};

/// Samples a three-modality classification task: per class a shared latent
/// and per-modality private latents, mixed by `redundancy` through fixed
/// seeded projections, plus Gaussian noise. Deterministic given the spec.
FeatureBundle generate_synthetic(const SyntheticSpec& spec, SyntheticModel* model = nullptr);

/// Bundle directory layout: manifest.json, <modality>.csv per modality,
/// labels.csv, splits.csv (optional; absent -> seeded 70/10/20).
void save_bundle(const FeatureBundle& bundle, const std::string& dir);
FeatureBundle load_bundle(const std::string& dir);

/// Builds the batch for an explicit index list, in that order.
ModalityBatch make_batch(const FeatureBundle& bundle, const std::vector<std::size_t>& indices);

/// Seeded minibatch iteration: every epoch() reshuffles with the internal
/// generator, keeps the final partial batch and emits one-hot labels.
class Batcher {
 public:
  Batcher(const FeatureBundle& bundle, Split split, std::size_t batch_size, std::uint64_t seed);
  std::vector<ModalityBatch> epoch();
  std::size_t sample_count() const { return indices_.size(); }

 private:
  const FeatureBundle& bundle_;
  std::vector<std::size_t> indices_;
  std::size_t batch_size_;
  Rng rng_;
};

}  // namespace argf
