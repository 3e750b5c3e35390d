#pragma once

#include <array>
#include <vector>

#include "argf/tensor.hpp"

namespace argf {

/// Modality slots, in fixed (a, v, l) order.
enum class Modality : std::size_t { Acoustic = 0, Visual = 1, Language = 2 };

inline constexpr std::array<Modality, 3> kModalities = {
    Modality::Acoustic, Modality::Visual, Modality::Language};

inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }
char modality_tag(Modality m);
Modality modality_from_tag(char tag);

/// One minibatch: per-modality feature matrices plus labels.
struct ModalityBatch {
  std::array<Tensor, 3> x;  // each (B, d), indexed by Modality
  Tensor y;                 // (B, N) one-hot
  std::vector<int> labels;  // (B) class ids

  std::size_t size() const { return labels.size(); }
  const Tensor& features(Modality m) const { return x[index_of(m)]; }
};

}  // namespace argf
