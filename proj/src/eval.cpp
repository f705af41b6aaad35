#include "percs/eval.hpp"

#include <algorithm>

namespace percs {

RealGrid iou_matrix(const LabelMask& pred, const LabelMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) throw DimensionError("iou_matrix: canvas mismatch");
  const int kp = pred.count();
  const int kg = gt.count();
  // joint(i, j) counts pixels with pred label i and gt label j, background included.
  Grid<std::int64_t> joint(kp + 1, kg + 1, 0);
  auto pv = pred.grid().values();
  auto gv = gt.grid().values();
  for (std::size_t i = 0; i < pv.size(); ++i) ++joint(pv[i], gv[i]);

  std::vector<std::int64_t> pred_area(static_cast<std::size_t>(kp) + 1, 0);
  std::vector<std::int64_t> gt_area(static_cast<std::size_t>(kg) + 1, 0);
  for (int i = 0; i <= kp; ++i) {
    for (int j = 0; j <= kg; ++j) {
      pred_area[i] += joint(i, j);
      gt_area[j] += joint(i, j);
    }
  }
  RealGrid out(kp, kg, 0.0);
  for (int i = 1; i <= kp; ++i) {
    for (int j = 1; j <= kg; ++j) {
      const std::int64_t inter = joint(i, j);
      if (inter == 0) continue;
      out(i - 1, j - 1) = static_cast<double>(inter) / static_cast<double>(pred_area[i] + gt_area[j] - inter);
    }
  }
  return out;
}

MatchCounts classify_matches(std::span<const MatchPair> pairs, int n_pred, int n_gt, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("IoU threshold must lie in (0,1)");
  if (pairs.size() > static_cast<std::size_t>(std::min(n_pred, n_gt))) {
    throw MalformedInputError("classify_matches: more pairs than instances");
  }
  MatchCounts c;
  for (const auto& p : pairs) c.tp += p.iou > threshold;
  c.fp = n_pred - c.tp;
  c.fn = n_gt - c.tp;
  return c;
}

Ratios metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw MalformedInputError("metrics: counts must be non-negative");
  Ratios r;
  auto ratio = [&](std::int64_t denom) {
    if (denom == 0) {
      r.degenerate = true;
      return 1.0;
    }
    return static_cast<double>(tp) / static_cast<double>(denom);
  };
  r.ap = ratio(tp + fp + fn);
  r.precision = ratio(tp + fp);
  r.recall = ratio(tp + fn);
  return r;
}

ThresholdMetrics make_threshold_metrics(double threshold, const MatchCounts& counts) {
  const Ratios r = metrics(counts.tp, counts.fp, counts.fn);
  ThresholdMetrics m{threshold, counts.tp, counts.fp, counts.fn, r.ap, r.precision, r.recall, r.degenerate};
  check_threshold_metrics(m);
  return m;
}

MatchResult match_instances(const LabelMask& pred, const LabelMask& gt, std::span<const double> thresholds) {
  const RealGrid ious = iou_matrix(pred, gt);
  const auto pairs = hungarian_match(ious);
  MatchResult result;
  std::vector<char> pred_used(static_cast<std::size_t>(pred.count()), 0);
  std::vector<char> gt_used(static_cast<std::size_t>(gt.count()), 0);
  for (const auto& p : pairs) {
    result.pairs.push_back({p.row + 1, p.col + 1, p.iou});
    pred_used[p.row] = 1;
    gt_used[p.col] = 1;
  }
  for (int i = 0; i < pred.count(); ++i) {
    if (!pred_used[i]) result.unmatched_pred.push_back(i + 1);
  }
  for (int j = 0; j < gt.count(); ++j) {
    if (!gt_used[j]) result.unmatched_gt.push_back(j + 1);
  }
  for (double t : thresholds) result.counts.push_back(classify_matches(pairs, pred.count(), gt.count(), t));
  return result;
}

ImageMetrics evaluate(const LabelMask& pred, const LabelMask& gt, std::span<const double> thresholds, std::string id) {
  const MatchResult match = match_instances(pred, gt, thresholds);
  ImageMetrics out{std::move(id), {}};
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    out.thresholds.push_back(make_threshold_metrics(thresholds[i], match.counts[i]));
  }
  return out;
}

MetricsReport aggregate(std::vector<ImageMetrics> per_image) {
  MetricsReport report;
  if (!per_image.empty()) {
    const std::size_t nt = per_image.front().thresholds.size();
    for (const auto& img : per_image) {
      if (img.thresholds.size() != nt) throw DimensionError("aggregate: images evaluated at different thresholds");
    }
    for (std::size_t t = 0; t < nt; ++t) {
      MatchCounts sum;
      ThresholdMetrics macro{per_image.front().thresholds[t].iou_threshold};
      for (const auto& img : per_image) {
        const auto& m = img.thresholds[t];
        sum.tp += m.tp;
        sum.fp += m.fp;
        sum.fn += m.fn;
        macro.ap += m.ap;
        macro.precision += m.precision;
        macro.recall += m.recall;
        macro.degenerate = macro.degenerate || m.degenerate;
      }
      report.aggregate.push_back(make_threshold_metrics(macro.iou_threshold, sum));
      const double n = static_cast<double>(per_image.size());
      macro.tp = sum.tp;
      macro.fp = sum.fp;
      macro.fn = sum.fn;
      macro.ap /= n;
      macro.precision /= n;
      macro.recall /= n;
      report.macro_aggregate.push_back(macro);
    }
  }
  report.per_image = std::move(per_image);
  return report;
}

}  // namespace percs
