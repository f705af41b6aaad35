#include "percs/baseline_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "percs/model_head.hpp"

namespace percs {
namespace {

double squared_distance(const CandidatePoint& a, const CandidatePoint& b) {
  const double dy = a.row - b.row;
  const double dx = a.col - b.col;
  return dy * dy + dx * dx;
}

}  // namespace

void check_candidate_set(const CandidateSet& set) {
  const double limit = set.min_dist * set.min_dist;
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    if (i > 0 && set.points[i].score > set.points[i - 1].score) {
      throw std::logic_error("candidate points are not sorted by score");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (squared_distance(set.points[i], set.points[j]) < limit) {
        throw std::logic_error("candidate points closer than min_dist");
      }
    }
  }
  if (static_cast<int>(set.points.size()) > set.k) throw std::logic_error("more candidate points than requested");
}

CandidateSet select_candidate_points(const RealGrid& sim, int k, double min_dist) {
  if (k < 1) throw ConfigError("select_candidate_points: k must be >= 1");
  if (!(min_dist >= 0.0) || !std::isfinite(min_dist)) throw ConfigError("select_candidate_points: min_dist must be >= 0");
  for (double v : sim.values()) {
    if (!std::isfinite(v)) throw MalformedInputError("select_candidate_points: non-finite similarity");
  }

  std::vector<std::size_t> order(sim.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto values = sim.values();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  CandidateSet out{{}, k, min_dist};
  const double limit = min_dist * min_dist;
  for (std::size_t idx : order) {
    if (static_cast<int>(out.points.size()) == k) break;
    const CandidatePoint c{static_cast<int>(idx / sim.width()), static_cast<int>(idx % sim.width()), values[idx]};
    const bool far = std::all_of(out.points.begin(), out.points.end(),
                                 [&](const CandidatePoint& p) { return squared_distance(p, c) >= limit; });
    if (far) out.points.push_back(c);
  }
  check_candidate_set(out);
  return out;
}

InstanceSet nms_masks(const InstanceSet& instances, double iou_thresh) {
  if (!(iou_thresh >= 0.0 && iou_thresh < 1.0)) throw ConfigError("nms_masks: threshold must lie in [0,1)");
  check_instance_set(instances);
  if (instances.scores.size() != instances.masks.size()) throw MalformedInputError("nms_masks: scores are required");

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return instances.scores[a] > instances.scores[b]; });

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t j) {
      return iou(instances.masks[i], instances.masks[j]) <= iou_thresh;
    });
    if (clear) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());

  InstanceSet out{instances.height, instances.width, {}, {}};
  for (std::size_t i : kept) {
    out.masks.push_back(instances.masks[i]);
    out.scores.push_back(instances.scores[i]);
  }
  return out;
}

InstanceSet similarity_filter(const InstanceSet& instances, const PatchFeatureMap& features,
                              const ReferenceEmbedding& ref, double thresh) {
  check_instance_set(instances);
  if (ref.dim() != features.dim()) throw DimensionError("similarity_filter: feature and reference dims differ");
  if (ref.is_zero()) throw EmptyReferenceError("similarity_filter: empty reference");
  implied_patch_size(features, instances.height, instances.width);

  InstanceSet out{instances.height, instances.width, {}, {}};
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const BinaryMask& mask = instances.masks[i];
    double cosine = 0.0;
    try {
      const ReferenceEmbedding e = masked_mean_embedding(features, mask);
      for (int d = 0; d < ref.dim(); ++d) cosine += e.vector()[d] * ref.vector()[d];
    } catch (const EmptyReferenceError&) {
      cosine = 0.0;  // all covered features are zero
    }
    if (cosine >= thresh) {
      out.masks.push_back(mask);
      if (!instances.scores.empty()) out.scores.push_back(instances.scores[i]);
    }
  }
  return out;
}

}  // namespace percs
