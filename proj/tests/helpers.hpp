#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "percs/core.hpp"
#include "percs/dataset.hpp"
#include "percs/eval.hpp"

namespace testing {

inline percs::LabelMask labels(int h, int w, const std::vector<std::int64_t>& raw) {
  return percs::validate_label_mask(h, w, raw);
}

inline percs::BinaryMask disk(int h, int w, double cy, double cx, double r) {
  percs::BinaryMask m(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(y, x) = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
  }
  return m;
}

inline percs::BinaryMask rect(int h, int w, int y0, int x0, int rh, int rw) {
  percs::BinaryMask m(h, w, 0);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) m(y, x) = 1;
  }
  return m;
}

/// Paints masks in order as labels 1..n; later masks win on overlap.
inline percs::LabelMask paint(const std::vector<percs::BinaryMask>& masks) {
  const int h = masks.at(0).height();
  const int w = masks.at(0).width();
  std::vector<std::int64_t> raw(static_cast<std::size_t>(h) * w, 0);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (masks[k].values()[i]) raw[i] = static_cast<std::int64_t>(k) + 1;
    }
  }
  return percs::validate_label_mask(h, w, raw);
}

/// Blob scene from the fixture generator.
inline percs::Sample scene(std::uint64_t seed, int h, int w, double rmin, double rmax, int max_blobs, int n_types = 2) {
  percs::SynthSpec spec;
  spec.height = h;
  spec.width = w;
  spec.min_radius = rmin;
  spec.max_radius = rmax;
  spec.min_blobs = 1;
  spec.max_blobs = max_blobs;
  spec.n_types = n_types;
  std::mt19937_64 rng(seed);
  return percs::synth_scene(spec, rng).sample;
}

/// Mean over ground-truth instances of the IoU of their Hungarian partner (0 if unmatched).
inline double mean_matched_iou(const percs::LabelMask& pred, const percs::LabelMask& gt) {
  if (gt.count() == 0) return pred.count() == 0 ? 1.0 : 0.0;
  const auto pairs = percs::hungarian_match(percs::iou_matrix(pred, gt));
  double total = 0.0;
  for (const auto& p : pairs) total += p.iou;
  return total / gt.count();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("percs_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
