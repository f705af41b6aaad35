#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "percs/errors.hpp"

namespace percs {

/// Row-major pixel coordinate, y increasing downward.
struct Pixel {
  int y = 0;
  int x = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), values_(checked_size(height, width), fill) {}
  Grid(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != checked_size(height, width)) {
      throw DimensionError("grid value count does not match height*width");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& operator()(int y, int x) { return values_[index(y, x)]; }
  const T& operator()(int y, int x) const { return values_[index(y, x)]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool contains(int y, int x) const { return y >= 0 && y < height_ && x >= 0 && x < width_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  static std::size_t checked_size(int height, int width) {
    if (height < 0 || width < 0) throw DimensionError("grid dimensions must be non-negative");
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

using BinaryMask = Grid<std::uint8_t>;
using RealGrid = Grid<double>;
/// Per-pixel pre-sigmoid probability; probability = sigmoid(logit).
using LogitMap = Grid<double>;
/// C channels sharing one canvas.
using ChannelStack = std::vector<RealGrid>;

std::int64_t count_pixels(const BinaryMask& mask);

/// Intensity image with 1 to 3 interleaved channels, values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  float at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  /// Channel mean at one pixel.
  float gray(int y, int x) const;
  std::span<const float> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<float> data_;
};

/// Instance map: 0 is background, instances are labelled 1..K with every label present.
class LabelMask {
 public:
  LabelMask() = default;
  /// Accepts only labels that already form the contiguous set {0..K}; see validate_label_mask.
  LabelMask(int height, int width, std::vector<std::int32_t> labels);
  static LabelMask background(int height, int width);

  int height() const { return labels_.height(); }
  int width() const { return labels_.width(); }
  int count() const { return count_; }
  std::int32_t operator()(int y, int x) const { return labels_(y, x); }
  const Grid<std::int32_t>& grid() const { return labels_; }

  BinaryMask instance(int label) const;
  BinaryMask foreground() const;
  /// Pixel count per label, indexed 0..K.
  std::vector<std::int64_t> areas() const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  Grid<std::int32_t> labels_;
  int count_ = 0;
};

/// Relabels arbitrary non-negative labels to {0..K} in rank order of their values.
LabelMask validate_label_mask(int height, int width, std::span<const std::int64_t> raw);
LabelMask validate_label_mask(const Grid<std::int64_t>& raw);

/// Per-pixel (dy, dx) direction field.
struct FlowField {
  RealGrid dy;
  RealGrid dx;

  FlowField() = default;
  FlowField(int height, int width) : dy(height, width, 0.0), dx(height, width, 0.0) {}
  int height() const { return dy.height(); }
  int width() const { return dy.width(); }
  friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Throws unless the field is finite, zero on background and of magnitude <= 1 inside instances.
void check_flow_field(const FlowField& flow, const LabelMask& mask);

/// Query features on a grid_h x grid_w patch grid, one D-vector per patch.
class PatchFeatureMap {
 public:
  PatchFeatureMap() = default;
  PatchFeatureMap(int grid_h, int grid_w, int dim, std::vector<double> features);

  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }
  int dim() const { return dim_; }
  int tokens() const { return grid_h_ * grid_w_; }
  std::span<const double> feature(int gy, int gx) const { return token(gy * grid_w_ + gx); }
  std::span<const double> token(int index) const {
    return {features_.data() + static_cast<std::size_t>(index) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> data() const { return features_; }

  /// Sub-grid of patches starting at (gy, gx).
  PatchFeatureMap crop(int gy, int gx, int rows, int cols) const;

  friend bool operator==(const PatchFeatureMap&, const PatchFeatureMap&) = default;

 private:
  int grid_h_ = 0;
  int grid_w_ = 0;
  int dim_ = 0;
  std::vector<double> features_;
};

/// Unit-norm reference vector, or the zero vector for an empty reference.
class ReferenceEmbedding {
 public:
  ReferenceEmbedding() = default;
  explicit ReferenceEmbedding(std::vector<double> vector);
  int dim() const { return static_cast<int>(vector_.size()); }
  bool is_zero() const;
  std::span<const double> vector() const { return vector_; }

 private:
  std::vector<double> vector_;
};

struct CellEmbedding {
  std::vector<double> vector;
  int class_label = 0;
};

/// Throws MalformedInputError unless |z| = 1 within 1e-6.
void check_unit(const CellEmbedding& cell);

/// Candidate or final instances on one canvas; masks may overlap for candidate sets.
struct InstanceSet {
  int height = 0;
  int width = 0;
  std::vector<BinaryMask> masks;
  std::vector<double> scores;  // empty, or one per mask

  std::size_t size() const { return masks.size(); }
};

void check_instance_set(const InstanceSet& set);
InstanceSet instances_from_labels(const LabelMask& mask);
/// Paints instances in order; throws if any two overlap.
LabelMask labels_from_instances(const InstanceSet& set);

/// Intersection over union of two masks on the same canvas; 0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

struct ThresholdMetrics {
  double iou_threshold = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// True when some ratio fell back to the 0/0 convention.
  bool degenerate = false;
};

/// Throws std::logic_error when the count/ratio identities do not hold.
void check_threshold_metrics(const ThresholdMetrics& m);

struct ImageMetrics {
  std::string id;
  std::vector<ThresholdMetrics> thresholds;
};

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  std::vector<ThresholdMetrics> aggregate;        // micro: counts summed before the ratios
  std::vector<ThresholdMetrics> macro_aggregate;  // per-image ratios averaged
};

}  // namespace percs
