#pragma once

#include <vector>

#include "percs/core.hpp"

namespace percs {

struct CandidatePoint {
  int row = 0;
  int col = 0;
  double score = 0.0;
  friend bool operator==(const CandidatePoint&, const CandidatePoint&) = default;
};

struct CandidateSet {
  std::vector<CandidatePoint> points;  // descending score
  int k = 0;
  double min_dist = 0.0;
};

/// Greedy: take the highest-scoring pixel at distance >= min_dist from every chosen
/// point until k points are chosen or none remain. Ties go to row-major order.
CandidateSet select_candidate_points(const RealGrid& sim, int k, double min_dist);

/// Throws std::logic_error when the pairwise-distance or ordering invariant fails.
void check_candidate_set(const CandidateSet& set);

/// Greedy mask NMS by descending score (input order breaks ties). An instance is kept
/// iff its mask IoU with every kept instance is <= iou_thresh. Kept instances retain
/// their input order.
InstanceSet nms_masks(const InstanceSet& instances, double iou_thresh);

inline constexpr double kDefaultFilterThreshold = 0.5;

/// Keeps instances whose masked-mean patch embedding has cosine >= thresh with `ref`.
/// Instances whose embedding is zero have cosine 0.
InstanceSet similarity_filter(const InstanceSet& instances, const PatchFeatureMap& features,
                              const ReferenceEmbedding& ref, double thresh = kDefaultFilterThreshold);

}  // namespace percs
