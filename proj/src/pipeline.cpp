#include "percs/pipeline.hpp"

#include <algorithm>

#include "percs/baseline_filter.hpp"
#include "percs/tiling.hpp"

namespace percs {

ChannelStack tiled_head_maps(const PatchFeatureMap& features, const ReferenceEmbedding& ref, const HeadWeights& weights,
                             int height, int width, const TilingConfig& tiling) {
  const int p = implied_patch_size(features, height, width);
  const TileGrid grid = plan_tiles(height, width, tiling.window, tiling.stride);
  if (tiling.window % p != 0) throw ConfigError("window must be a multiple of the patch size");
  std::vector<ChannelStack> outputs;
  outputs.reserve(grid.anchors.size());
  for (const Pixel& a : grid.anchors) {
    if (a.y % p != 0 || a.x % p != 0) throw ConfigError("tile anchors must fall on patch boundaries; use a stride that is a multiple of the patch size");
    const PatchFeatureMap tile = features.crop(a.y / p, a.x / p, tiling.window / p, tiling.window / p);
    outputs.push_back(run_head(tile, ref, weights));
  }
  return stitch(grid, outputs);
}

ChannelStack tiled_gt_maps(const LabelMask& gt, const TilingConfig& tiling, double logit_scale) {
  const TileGrid grid = plan_tiles(gt.height(), gt.width(), tiling.window, tiling.stride);
  const GtFlows gt_flows = compute_gt_flows(gt);
  RealGrid logits(gt.height(), gt.width(), -logit_scale);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (gt(y, x) > 0) logits(y, x) = logit_scale;
    }
  }
  const ChannelStack full{gt_flows.flow.dy, gt_flows.flow.dx, logits};
  std::vector<ChannelStack> outputs;
  outputs.reserve(grid.anchors.size());
  for (const Pixel& a : grid.anchors) outputs.push_back(crop_channels(full, a, tiling.window));
  return stitch(grid, outputs);
}

LabelMask reconstruct(const ChannelStack& maps, const ReconstructionParams& params) {
  auto [flow, logits] = split_head_output(maps);
  return follow_flows(flow, logits, params);
}

LabelMask filter_labels(const LabelMask& labels, const PatchFeatureMap& features, const ReferenceEmbedding& ref,
                        double thresh) {
  const InstanceSet kept = similarity_filter(instances_from_labels(labels), features, ref, thresh);
  return labels_from_instances(kept);
}

Image reflect_pad(const Image& image, int min_h, int min_w, int multiple) {
  if (multiple < 1) throw ConfigError("reflect_pad: multiple must be >= 1");
  auto target = [multiple](int extent, int minimum) {
    const int n = std::max(extent, minimum);
    return (n + multiple - 1) / multiple * multiple;
  };
  const int h = target(image.height(), min_h);
  const int w = target(image.width(), min_w);
  if (h == image.height() && w == image.width()) return image;
  // Mirror without repeating the edge pixel; wraps back and forth for large pads.
  auto mirror = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  const int c = image.channels();
  std::vector<float> data(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y) {
    const int sy = mirror(y, image.height());
    for (int x = 0; x < w; ++x) {
      const int sx = mirror(x, image.width());
      for (int k = 0; k < c; ++k) data[(static_cast<std::size_t>(y) * w + x) * c + k] = image.at(sy, sx, k);
    }
  }
  return Image(h, w, c, std::move(data));
}

LabelMask pad_labels(const LabelMask& mask, int height, int width) {
  if (height < mask.height() || width < mask.width()) throw DimensionError("pad_labels: target is smaller than the mask");
  std::vector<std::int32_t> out(static_cast<std::size_t>(height) * width, 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out[static_cast<std::size_t>(y) * width + x] = mask(y, x);
  }
  return LabelMask(height, width, std::move(out));
}

LabelMask crop_labels(const LabelMask& mask, int height, int width) {
  if (height > mask.height() || width > mask.width()) throw DimensionError("crop_labels: crop exceeds the mask");
  std::vector<std::int64_t> raw(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) raw[static_cast<std::size_t>(y) * width + x] = mask(y, x);
  }
  return validate_label_mask(height, width, raw);
}

std::vector<std::uint8_t> render_overlay(const Image& image, const LabelMask& labels, const BinaryMask& reference) {
  const int h = image.height();
  const int w = image.width();
  if (labels.height() != h || labels.width() != w || reference.height() != h || reference.width() != w) {
    throw DimensionError("render_overlay: canvas mismatch");
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  auto put = [&](int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* px = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
    px[0] = r;
    px[1] = g;
    px[2] = b;
  };
  auto boundary = [&](auto&& value, int y, int x) {
    const auto v = value(y, x);
    if (v == 0) return false;
    constexpr int dy[] = {-1, 1, 0, 0};
    constexpr int dx[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int ny = y + dy[k];
      const int nx = x + dx[k];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w || value(ny, nx) != v) return true;
    }
    return false;
  };
  const auto label_at = [&](int y, int x) { return labels(y, x); };
  const auto ref_at = [&](int y, int x) { return reference(y, x); };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (boundary(ref_at, y, x)) {
        put(y, x, 255, 0, 0);
      } else if (boundary(label_at, y, x)) {
        // Knuth multiplicative hash; red is kept low so instance outlines never read as the reference.
        const std::uint32_t hsh = static_cast<std::uint32_t>(labels(y, x)) * 2654435761u;
        put(y, x, static_cast<std::uint8_t>(hsh & 0x7f), static_cast<std::uint8_t>(128 + ((hsh >> 8) & 0x7f)),
            static_cast<std::uint8_t>(128 + ((hsh >> 16) & 0x7f)));
      } else {
        const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(image.gray(y, x), 0.0f, 1.0f) * 255.0f));
        put(y, x, g, g, g);
      }
    }
  }
  return rgb;
}

}  // namespace percs
