#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "percs/core.hpp"

namespace percs {

/// Reads 8- or 16-bit gray/RGB PNGs (alpha dropped, palette expanded) into [0,1] intensities.
Image read_png_image(const std::filesystem::path& path);
/// 8-bit gray or RGB, intensities rounded to the nearest level.
void write_png_image(const std::filesystem::path& path, const Image& image);

/// Raw label values of a single-channel 8- or 16-bit PNG.
Grid<std::int64_t> read_png_labels(const std::filesystem::path& path);
/// read_png_labels followed by validate_label_mask.
LabelMask read_label_mask(const std::filesystem::path& path);
/// 16-bit single-channel PNG holding the raw labels.
void write_label_mask(const std::filesystem::path& path, const LabelMask& mask);

/// 8-bit RGB, interleaved, row-major.
void write_png_rgb(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> rgb);

std::vector<std::uint8_t> encode_png(int height, int width, int channels, int bit_depth,
                                     std::span<const std::uint16_t> samples);

}  // namespace percs
