#include "permsig/metrics.hpp"

#include <string>

#include "permsig/error.hpp"

namespace permsig {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::BalancedAccuracy: return "bacc";
    case MetricKind::F1: return "f1";
    case MetricKind::Accuracy: return "accuracy";
  }
  return "unknown";
}

MetricKind parse_metric(std::string_view text) {
  if (text == "bacc") return MetricKind::BalancedAccuracy;
  if (text == "f1") return MetricKind::F1;
  if (text == "accuracy" || text == "acc") return MetricKind::Accuracy;
  throw Error(ErrorCode::InvalidConfig, "unknown metric '" + std::string(text) + "'");
}

ConfusionMatrix confusion(std::span<const int> y, std::span<const int> y_pred) {
  if (y.size() != y_pred.size() || y.empty()) {
    throw Error(ErrorCode::LengthMismatch, "labels (" + std::to_string(y.size()) +
                                               ") and predictions (" + std::to_string(y_pred.size()) +
                                               ") must have equal non-zero length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 1) {
      (y_pred[i] == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (y_pred[i] == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

double bacc(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0) {
    throw Error(ErrorCode::UndefinedMetric, "balanced accuracy needs both classes present in y");
  }
  const double sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  const double specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  return (sensitivity + specificity) / 2.0;
}

double f1(const ConfusionMatrix& cm) {
  const std::size_t denom = 2 * cm.tp + cm.fp + cm.fn;
  if (denom == 0) return 0.0;
  return static_cast<double>(2 * cm.tp) / static_cast<double>(denom);
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::UndefinedMetric, "accuracy of zero subjects");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double evaluate(MetricKind kind, const ConfusionMatrix& cm) {
  switch (kind) {
    case MetricKind::BalancedAccuracy: return bacc(cm);
    case MetricKind::F1: return f1(cm);
    case MetricKind::Accuracy: return accuracy(cm);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown metric kind");
}

double evaluate(MetricKind kind, std::span<const int> y, std::span<const int> y_pred) {
  return evaluate(kind, confusion(y, y_pred));
}

}  // namespace permsig
