#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "peadv/errors.hpp"

namespace peadv::metrics {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fn = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fn + fp + tn; }
};

// score >= threshold predicts malicious; labels are 1 = malware, 0 = benign.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

double detection_rate(const ConfusionMatrix& cm);        // TP / (TP + FN)
double false_positive_rate(const ConfusionMatrix& cm);   // FP / (FP + TN)

double evasion_rate(std::span<const std::uint8_t> evaded_flags);

double contamination_rate(std::uint64_t poisoned_count, std::uint64_t total_count);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Stepwise ROC over every distinct score threshold (descending); starts at
// (0,0), ends at (1,1); tied scores collapse into a single threshold.
std::vector<RocPoint> roc(std::span<const double> scores, std::span<const int> labels);

double auc(const std::vector<RocPoint>& points);

// TPR where the curve first reaches FPR >= level (step-function reading of
// "detection rate at X% FPR"); level 0 returns the highest TPR at FPR 0.
double dr_at_fpr(const std::vector<RocPoint>& points, double level);

std::string confusion_csv(const ConfusionMatrix& cm);
std::string roc_csv(const std::vector<RocPoint>& points);

// Percentage rendering used in report tables (0.9764 -> "97.64").
std::string percent(double fraction);

}  // namespace peadv::metrics
