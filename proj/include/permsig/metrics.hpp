#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace permsig {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

enum class MetricKind { BalancedAccuracy, F1, Accuracy };

std::string_view to_string(MetricKind kind);
// Accepts "bacc", "f1", "accuracy". Throws InvalidConfig.
MetricKind parse_metric(std::string_view text);

// Throws LengthMismatch (different lengths or empty input).
ConfusionMatrix confusion(std::span<const int> y, std::span<const int> y_pred);

// (tp/(tp+fn) + tn/(tn+fp)) / 2. Throws UndefinedMetric when a class is absent from y.
double bacc(const ConfusionMatrix& cm);
// 2tp / (2tp + fp + fn), 0 when the denominator is 0.
double f1(const ConfusionMatrix& cm);
// (tp + tn) / total. Throws UndefinedMetric on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

double evaluate(MetricKind kind, const ConfusionMatrix& cm);
double evaluate(MetricKind kind, std::span<const int> y, std::span<const int> y_pred);

}  // namespace permsig
