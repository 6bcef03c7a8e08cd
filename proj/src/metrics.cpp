#include "snrdet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "snrdet/error.hpp"

namespace snrdet {

ConfusionCounts confusion(const std::vector<bool>& decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size()) {
    throw InvalidArgument("confusion: " + std::to_string(decisions.size()) + " decisions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] != 0;
    if (decisions[i]) {
      ++(truth ? c.tp : c.fp);
    } else {
      ++(truth ? c.fn : c.tn);
    }
  }
  return c;
}

double weighted_accuracy_or_nan(const ConfusionCounts& c) {
  const std::size_t pos = c.tp + c.fn, neg = c.tn + c.fp;
  if (pos == 0 || neg == 0) return std::nan("");
  return 0.5 * (static_cast<double>(c.tp) / pos + static_cast<double>(c.tn) / neg);
}

MetricSummary summary(const ConfusionCounts& c, std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("summary: scores/labels length mismatch");
  if (!labels.empty() && c.total() != labels.size()) throw InvalidArgument("summary: counts inconsistent with labels");
  MetricSummary s;
  if (!scores.empty()) {
    constexpr double kClamp = 1e-7;
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double p = std::clamp(scores[i], kClamp, 1.0 - kClamp);
      loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    s.loss = loss / static_cast<double>(scores.size());
  }
  const double wacc = weighted_accuracy_or_nan(c);
  if (!std::isnan(wacc)) s.weighted_accuracy = wacc;
  if (c.tp + c.fp > 0) s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (s.precision && s.recall) {
    const double p = *s.precision, r = *s.recall;
    if (p + r > 0) s.f1 = 2.0 * p * r / (p + r);
    s.geometric_mean = std::sqrt(p * r);
  }
  return s;
}

std::string summary_json(const MetricSummary& s) {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  put("loss", s.loss);
  put("weighted_accuracy", s.weighted_accuracy);
  put("precision", s.precision);
  put("recall", s.recall);
  put("f1", s.f1);
  put("geometric_mean", s.geometric_mean);
  return j.dump();
}

}  // namespace snrdet
