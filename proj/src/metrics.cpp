#include "peadv/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace peadv::metrics {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_malicious = scores[i] >= threshold;
    if (labels[i]) {
      predicted_malicious ? ++cm.tp : ++cm.fn;
    } else {
      predicted_malicious ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

double detection_rate(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0) raise(Errc::no_positives, "no positive samples");
  return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double false_positive_rate(const ConfusionMatrix& cm) {
  if (cm.fp + cm.tn == 0) raise(Errc::no_negatives, "no negative samples");
  return static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn);
}

double evasion_rate(std::span<const std::uint8_t> evaded_flags) {
  if (evaded_flags.empty()) raise(Errc::empty_results, "no attack results after filtering");
  std::uint64_t evaded = 0;
  for (std::uint8_t f : evaded_flags) evaded += f ? 1 : 0;
  return static_cast<double>(evaded) / static_cast<double>(evaded_flags.size());
}

double contamination_rate(std::uint64_t poisoned_count, std::uint64_t total_count) {
  if (total_count == 0) throw std::invalid_argument("total_count must be > 0");
  if (poisoned_count > total_count) throw std::invalid_argument("poisoned_count exceeds total");
  return static_cast<double>(poisoned_count) / static_cast<double>(total_count);
}

std::vector<RocPoint> roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
  std::uint64_t pos = 0, neg = 0;
  for (int l : labels) l ? ++pos : ++neg;
  if (pos == 0 || neg == 0) raise(Errc::single_class, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = scores[order[i]];
    while (i < order.size() && scores[order[i]] == v) {
      labels[order[i]] ? ++tp : ++fp;
      ++i;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                      static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return points;
}

double auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

double dr_at_fpr(const std::vector<RocPoint>& points, double level) {
  if (points.empty()) throw std::invalid_argument("empty ROC");
  if (level < 0.0 || level > 1.0) throw std::invalid_argument("FPR level outside [0, 1]");
  if (level == 0.0) {
    double best = 0.0;
    for (const RocPoint& p : points) {
      if (p.fpr > 0.0) break;
      best = std::max(best, p.tpr);
    }
    return best;
  }
  for (const RocPoint& p : points) {
    if (p.fpr >= level - 1e-12) return p.tpr;
  }
  return points.back().tpr;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "tp,fn,fp,tn\n%llu,%llu,%llu,%llu\n",
                static_cast<unsigned long long>(cm.tp), static_cast<unsigned long long>(cm.fn),
                static_cast<unsigned long long>(cm.fp), static_cast<unsigned long long>(cm.tn));
  return buf;
}

std::string roc_csv(const std::vector<RocPoint>& points) {
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const RocPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace peadv::metrics
