#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace argf {

/// Classification metrics derived from a confusion matrix
/// (confusion[true][predicted]).
struct Metrics {
  std::vector<std::vector<std::size_t>> confusion;
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  double avg_f1 = 0.0;  // support-weighted average

  static Metrics from_confusion(std::vector<std::vector<std::size_t>> confusion);
  static Metrics from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                  std::size_t num_classes);
  std::size_t total() const;
};

}  // namespace argf
