#include "percs/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "percs/file_util.hpp"

namespace percs {
namespace {

struct DecodedPng {
  int height = 0;
  int width = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + n > cur->bytes.size()) png_error(png, "unexpected end of data");
  std::copy_n(cur->bytes.begin() + static_cast<std::ptrdiff_t>(cur->offset), n, out);
  cur->offset += n;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

DecodedPng decode_png(const std::vector<std::uint8_t>& bytes, bool keep_alpha_free_gray) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_read_struct(png, info, nullptr); }
  } cleanup{&png, &info};
  if (!info) throw IoError("png: cannot allocate info struct");

  ReadCursor cursor{bytes, 0};
  png_set_read_fn(png, &cursor, read_from_memory);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    if (keep_alpha_free_gray) throw IoError("png: label masks must be grayscale");
    png_set_palette_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) {
    if (keep_alpha_free_gray) throw IoError("png: label masks must be single-channel");
    png_set_strip_alpha(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);  // little-endian sample bytes
  png_read_update_info(png, info);

  DecodedPng out;
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (keep_alpha_free_gray && out.channels != 1) throw IoError("png: label masks must be single-channel");

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> raw(rowbytes * static_cast<std::size_t>(out.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.height) * out.width * out.channels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = out.bit_depth == 16
                         ? static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8))
                         : raw[i];
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(int height, int width, int channels, int bit_depth,
                                     std::span<const std::uint16_t> samples) {
  if (height < 1 || width < 1) throw DimensionError("png: empty image");
  if (channels != 1 && channels != 3) throw DimensionError("png: only gray or RGB output");
  if (bit_depth != 8 && bit_depth != 16) throw DimensionError("png: bit depth must be 8 or 16");
  if (samples.size() != static_cast<std::size_t>(height) * width * channels) throw DimensionError("png: sample count");

  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_write_struct(png, info); }
  } cleanup{&png, &info};
  if (!info) throw IoError("png: cannot allocate info struct");

  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t per_row = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> row(per_row * (bit_depth / 8));
  for (int y = 0; y < height; ++y) {
    for (std::size_t i = 0; i < per_row; ++i) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * per_row + i];
      if (bit_depth == 16) {
        row[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
      } else {
        row[i] = static_cast<std::uint8_t>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

Image read_png_image(const std::filesystem::path& path) {
  const DecodedPng d = decode_png(read_bytes(path), false);
  const int channels = d.channels;
  const double scale = d.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<float> data(d.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(d.samples[i] / scale);
  return Image(d.height, d.width, channels, std::move(data));
}

void write_png_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels() == 2) throw DimensionError("png: two-channel images are not supported");
  std::vector<std::uint16_t> samples(image.data().size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(image.data()[i] * 255.0));
  }
  write_atomic(path, encode_png(image.height(), image.width(), image.channels(), 8, samples));
}

Grid<std::int64_t> read_png_labels(const std::filesystem::path& path) {
  const DecodedPng d = decode_png(read_bytes(path), true);
  std::vector<std::int64_t> labels(d.samples.begin(), d.samples.end());
  return Grid<std::int64_t>(d.height, d.width, std::move(labels));
}

LabelMask read_label_mask(const std::filesystem::path& path) { return validate_label_mask(read_png_labels(path)); }

void write_label_mask(const std::filesystem::path& path, const LabelMask& mask) {
  if (mask.count() > 65535) throw DimensionError("png: more than 65535 instances");
  std::vector<std::uint16_t> samples(mask.grid().values().begin(), mask.grid().values().end());
  write_atomic(path, encode_png(mask.height(), mask.width(), 1, 16, samples));
}

void write_png_rgb(const std::filesystem::path& path, int height, int width, std::span<const std::uint8_t> rgb) {
  std::vector<std::uint16_t> samples(rgb.begin(), rgb.end());
  write_atomic(path, encode_png(height, width, 3, 8, samples));
}

}  // namespace percs
