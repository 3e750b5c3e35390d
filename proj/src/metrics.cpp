#include "argf/metrics.hpp"

#include <stdexcept>

namespace argf {

Metrics Metrics::from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t n = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != n) throw std::invalid_argument("confusion matrix must be square");
  }
  Metrics m;
  m.confusion = std::move(confusion);
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < n; ++p) total += m.confusion[t][p];
    correct += m.confusion[t][t];
  }
  m.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;

  m.per_class_f1.assign(n, 0.0);
  double weighted = 0.0;
  std::size_t support_sum = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = m.confusion[c][c], fn = 0, fp = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c) {
        fn += m.confusion[c][j];
        fp += m.confusion[j][c];
      }
    }
    const std::size_t denom = 2 * tp + fp + fn;
    m.per_class_f1[c] = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    const std::size_t support = tp + fn;
    weighted += m.per_class_f1[c] * static_cast<double>(support);
    support_sum += support;
  }
  m.avg_f1 = support_sum ? weighted / static_cast<double>(support_sum) : 0.0;
  return m;
}

Metrics Metrics::from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                  std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(truth.size()) + " labels vs " +
                                std::to_string(predicted.size()) + " predictions");
  }
  std::vector<std::vector<std::size_t>> confusion(num_classes,
                                                  std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])]++;
  }
  return from_confusion(std::move(confusion));
}

std::size_t Metrics::total() const {
  std::size_t total = 0;
  for (const auto& row : confusion) {
    for (std::size_t v : row) total += v;
  }
  return total;
}

}  // namespace argf
