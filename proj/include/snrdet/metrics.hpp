#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snrdet {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// Positive class = label 1 ("contains call").
ConfusionCounts confusion(const std::vector<bool>& decisions, std::span<const int> labels);

/// Metrics whose denominator is empty are absent.
struct MetricSummary {
  std::optional<double> loss;
  std::optional<double> weighted_accuracy;  // mean of per-class recalls
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;              // harmonic mean of precision and recall
  std::optional<double> geometric_mean;  // sqrt(precision * recall)
};

/// Probabilities are clamped to [1e-7, 1 - 1e-7] for the loss. With empty scores and labels only
/// the count-based metrics are filled.
MetricSummary summary(const ConfusionCounts& counts, std::span<const double> scores,
                      std::span<const int> labels);

double weighted_accuracy_or_nan(const ConfusionCounts& counts);

/// JSON object text for one summary, absent metrics as null.
std::string summary_json(const MetricSummary& s);

}  // namespace snrdet
