#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "percs/core.hpp"
#include "percs/flows.hpp"
#include "percs/model_head.hpp"

namespace percs {

struct TilingConfig {
  int window = 336;
  int stride = 168;
};

/// Runs the head on every window of the feature grid and averages the 3-channel
/// outputs (flows and logits) over overlaps. Anchors must fall on patch boundaries.
ChannelStack tiled_head_maps(const PatchFeatureMap& features, const ReferenceEmbedding& ref, const HeadWeights& weights,
                             int height, int width, const TilingConfig& tiling = {});

/// Stand-in for the head: ground-truth flows of `gt` with logits of +/-`logit_scale`,
/// cut into the same windows and stitched back.
ChannelStack tiled_gt_maps(const LabelMask& gt, const TilingConfig& tiling = {}, double logit_scale = 10.0);

/// follow_flows over a stitched 3-channel map.
LabelMask reconstruct(const ChannelStack& maps, const ReconstructionParams& params = {});

/// Drops instances whose embedding is less similar to `ref` than `thresh`, relabelling the rest.
LabelMask filter_labels(const LabelMask& labels, const PatchFeatureMap& features, const ReferenceEmbedding& ref,
                        double thresh);

/// Bottom/right reflect padding up to at least `min_h` x `min_w`, then to a multiple of `multiple`.
Image reflect_pad(const Image& image, int min_h, int min_w, int multiple);
/// Zero padding of a label mask to the given size.
LabelMask pad_labels(const LabelMask& mask, int height, int width);
/// Top-left crop, relabelled in rank order.
LabelMask crop_labels(const LabelMask& mask, int height, int width);

/// RGB overlay: the image in gray, instance boundaries in per-label colors and the
/// reference boundary in red. Interleaved 8-bit, row-major.
std::vector<std::uint8_t> render_overlay(const Image& image, const LabelMask& labels, const BinaryMask& reference);

}  // namespace percs
