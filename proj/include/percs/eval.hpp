#pragma once

#include <span>
#include <string>
#include <vector>

#include "percs/core.hpp"

namespace percs {

inline const std::vector<double> kDefaultIouThresholds{0.3, 0.5};

/// Kp x Kg matrix; entry (i, j) = IoU of predicted label i+1 and ground-truth label j+1.
/// Built from one joint histogram pass over the pixels.
RealGrid iou_matrix(const LabelMask& pred, const LabelMask& gt);

struct MatchPair {
  int row = 0;  // prediction index (label - 1)
  int col = 0;  // ground-truth index (label - 1)
  double iou = 0.0;
};

/// One-to-one assignment maximizing the summed IoU (Kuhn-Munkres on negated values,
/// rectangular inputs padded with zero-benefit dummies). Zero-IoU pairs are dropped.
/// Pairs are returned sorted by row.
std::vector<MatchPair> hungarian_match(const RealGrid& ious);

/// Sum of pair IoUs in row order.
double assignment_total(std::span<const MatchPair> pairs);

struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

/// TP = pairs with IoU strictly above `threshold`; FP = Kp - TP; FN = Kg - TP.
MatchCounts classify_matches(std::span<const MatchPair> pairs, int n_pred, int n_gt, double threshold);

struct Ratios {
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool degenerate = false;
};

/// AP = TP/(TP+FP+FN), P = TP/(TP+FP), R = TP/(TP+FN); an empty denominator gives 1.
Ratios metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn);

ThresholdMetrics make_threshold_metrics(double threshold, const MatchCounts& counts);

struct MatchResult {
  std::vector<MatchPair> pairs;  // labels, not indices
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
  std::vector<MatchCounts> counts;  // one per threshold
};

/// Matching is done once on the raw IoU matrix; thresholds are applied afterwards.
MatchResult match_instances(const LabelMask& pred, const LabelMask& gt, std::span<const double> thresholds);

ImageMetrics evaluate(const LabelMask& pred, const LabelMask& gt, std::span<const double> thresholds = kDefaultIouThresholds,
                      std::string id = {});

/// Micro aggregate (counts summed, then ratios) and macro aggregate (mean of per-image ratios).
MetricsReport aggregate(std::vector<ImageMetrics> per_image);

/// {"per_image":[{"id","thresholds":[{"iou","TP","FP","FN","AP","P","R","degenerate"}]}],
///  "aggregate":[...], "macro_aggregate":[...]} with ratios rounded to 6 decimals.
std::string metrics_to_json(const MetricsReport& report);

}  // namespace percs
