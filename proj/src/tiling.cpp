#include "percs/tiling.hpp"

#include <algorithm>

namespace percs {

std::vector<int> axis_anchors(int extent, int window, int stride) {
  if (window < 1 || stride < 1 || stride > window) throw ConfigError("tiling needs 0 < stride <= window");
  if (window > extent) throw DimensionError("window larger than canvas; pad the image first");
  std::vector<int> anchors;
  for (int a = 0; a + window <= extent; a += stride) anchors.push_back(a);
  if (anchors.back() + window < extent) anchors.push_back(extent - window);
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  return anchors;
}

TileGrid plan_tiles(int height, int width, int window, int stride) {
  TileGrid grid{window, stride, height, width, {}};
  const auto rows = axis_anchors(height, window, stride);
  const auto cols = axis_anchors(width, window, stride);
  for (int r : rows) {
    for (int c : cols) grid.anchors.push_back({r, c});
  }
  return grid;
}

Grid<int> coverage(const TileGrid& grid) {
  Grid<int> count(grid.height, grid.width, 0);
  for (const auto& a : grid.anchors) {
    for (int y = a.y; y < a.y + grid.window; ++y) {
      for (int x = a.x; x < a.x + grid.window; ++x) ++count(y, x);
    }
  }
  return count;
}

ChannelStack stitch(const TileGrid& grid, const std::vector<ChannelStack>& tile_outputs) {
  if (tile_outputs.size() != grid.anchors.size()) throw DimensionError("stitch: one output per tile required");
  if (tile_outputs.empty()) throw DimensionError("stitch: empty tile grid");
  const std::size_t channels = tile_outputs.front().size();
  for (const auto& t : tile_outputs) {
    if (t.size() != channels) throw DimensionError("stitch: tiles disagree on channel count");
    for (const auto& c : t) {
      if (c.height() != grid.window || c.width() != grid.window) throw DimensionError("stitch: mis-shaped tile");
    }
  }
  // Running mean: m_n = m_{n-1} + (v - m_{n-1}) / n, which keeps constant fields exact.
  ChannelStack out(channels, RealGrid(grid.height, grid.width, 0.0));
  Grid<int> seen(grid.height, grid.width, 0);
  for (std::size_t t = 0; t < tile_outputs.size(); ++t) {
    const Pixel a = grid.anchors[t];
    for (int y = 0; y < grid.window; ++y) {
      for (int x = 0; x < grid.window; ++x) {
        const int n = ++seen(a.y + y, a.x + x);
        for (std::size_t c = 0; c < channels; ++c) {
          double& m = out[c](a.y + y, a.x + x);
          m += (tile_outputs[t][c](y, x) - m) / n;
        }
      }
    }
  }
  for (auto v : seen.values()) {
    if (v == 0) throw DimensionError("stitch: tile grid leaves pixels uncovered");
  }
  return out;
}

ChannelStack crop_channels(const ChannelStack& channels, Pixel anchor, int window) {
  ChannelStack out;
  out.reserve(channels.size());
  for (const auto& c : channels) {
    if (anchor.y < 0 || anchor.x < 0 || anchor.y + window > c.height() || anchor.x + window > c.width()) {
      throw DimensionError("crop outside canvas");
    }
    RealGrid tile(window, window, 0.0);
    for (int y = 0; y < window; ++y) {
      for (int x = 0; x < window; ++x) tile(y, x) = c(anchor.y + y, anchor.x + x);
    }
    out.push_back(std::move(tile));
  }
  return out;
}

}  // namespace percs
