#pragma once

#include <vector>

#include "percs/core.hpp"

namespace percs {

/// Square sliding windows over an H x W canvas.
struct TileGrid {
  int window = 0;
  int stride = 0;
  int height = 0;
  int width = 0;
  std::vector<Pixel> anchors;  // top-left corners, sorted, deduplicated
};

/// Anchors at multiples of `stride` on each axis, plus one clamped anchor at
/// (extent - window) when the last regular window stops short of the edge.
/// Throws DimensionError when the window does not fit; callers pad first.
TileGrid plan_tiles(int height, int width, int window, int stride);

/// Anchor positions along one axis.
std::vector<int> axis_anchors(int extent, int window, int stride);

/// Number of windows covering each pixel.
Grid<int> coverage(const TileGrid& grid);

/// Averages per-tile C-channel outputs into the full canvas; every pixel is
/// the arithmetic mean of the tile values covering it.
ChannelStack stitch(const TileGrid& grid, const std::vector<ChannelStack>& tile_outputs);

/// Window-sized crop of every channel at `anchor`.
ChannelStack crop_channels(const ChannelStack& channels, Pixel anchor, int window);

}  // namespace percs
