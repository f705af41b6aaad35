#include "percs/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace percs {

std::int64_t count_pixels(const BinaryMask& mask) {
  std::int64_t n = 0;
  for (auto v : mask.values()) n += v != 0;
  return n;
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 1 || width < 1) throw DimensionError("image dimensions must be >= 1");
  if (channels < 1 || channels > 3) throw DimensionError("image must have 1 to 3 channels");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError("image data size does not match height*width*channels");
  }
  for (float v : data_) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw MalformedInputError("image intensities must be finite and within [0,1]");
    }
  }
}

float Image::gray(int y, int x) const {
  const std::size_t base = (static_cast<std::size_t>(y) * width_ + x) * channels_;
  float s = 0.0f;
  for (int c = 0; c < channels_; ++c) s += data_[base + c];
  return s / static_cast<float>(channels_);
}

LabelMask::LabelMask(int height, int width, std::vector<std::int32_t> labels)
    : labels_(height, width, std::move(labels)) {
  std::int32_t max_label = 0;
  for (auto v : labels_.values()) {
    if (v < 0) throw MalformedInputError("negative label in label mask");
    max_label = std::max(max_label, v);
  }
  std::vector<char> seen(static_cast<std::size_t>(max_label) + 1, 0);
  for (auto v : labels_.values()) seen[v] = 1;
  for (std::int32_t k = 1; k <= max_label; ++k) {
    if (!seen[k]) throw MalformedInputError("label mask labels are not contiguous; use validate_label_mask");
  }
  count_ = max_label;
}

LabelMask LabelMask::background(int height, int width) {
  return LabelMask(height, width, std::vector<std::int32_t>(static_cast<std::size_t>(height) * width, 0));
}

BinaryMask LabelMask::instance(int label) const {
  BinaryMask out(height(), width(), 0);
  auto src = labels_.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == label;
  return out;
}

BinaryMask LabelMask::foreground() const {
  BinaryMask out(height(), width(), 0);
  auto src = labels_.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0;
  return out;
}

std::vector<std::int64_t> LabelMask::areas() const {
  std::vector<std::int64_t> a(static_cast<std::size_t>(count_) + 1, 0);
  for (auto v : labels_.values()) ++a[v];
  return a;
}

LabelMask validate_label_mask(int height, int width, std::span<const std::int64_t> raw) {
  if (raw.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw DimensionError("label grid size does not match height*width");
  }
  std::map<std::int64_t, std::int32_t> rank;
  for (auto v : raw) {
    if (v < 0) throw MalformedInputError("negative label in label mask");
    if (v > 0) rank.emplace(v, 0);
  }
  std::int32_t next = 1;
  for (auto& [value, label] : rank) label = next++;
  std::vector<std::int32_t> labels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) labels[i] = raw[i] == 0 ? 0 : rank.at(raw[i]);
  return LabelMask(height, width, std::move(labels));
}

LabelMask validate_label_mask(const Grid<std::int64_t>& raw) {
  return validate_label_mask(raw.height(), raw.width(), raw.values());
}

void check_flow_field(const FlowField& flow, const LabelMask& mask) {
  if (!flow.dy.same_shape(flow.dx) || flow.height() != mask.height() || flow.width() != mask.width()) {
    throw DimensionError("flow field and mask canvases differ");
  }
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const double dy = flow.dy(y, x);
      const double dx = flow.dx(y, x);
      if (!std::isfinite(dy) || !std::isfinite(dx)) throw MalformedInputError("non-finite flow vector");
      if (mask(y, x) == 0) {
        if (dy != 0.0 || dx != 0.0) throw MalformedInputError("non-zero flow on background");
      } else if (std::hypot(dy, dx) > 1.0 + 1e-6) {
        throw MalformedInputError("flow magnitude above 1 inside an instance");
      }
    }
  }
}

PatchFeatureMap::PatchFeatureMap(int grid_h, int grid_w, int dim, std::vector<double> features)
    : grid_h_(grid_h), grid_w_(grid_w), dim_(dim), features_(std::move(features)) {
  if (grid_h < 1 || grid_w < 1 || dim < 1) throw DimensionError("feature map needs grid_h, grid_w, dim >= 1");
  if (features_.size() != static_cast<std::size_t>(grid_h) * grid_w * dim) {
    throw DimensionError("feature data size does not match grid_h*grid_w*dim");
  }
  for (double v : features_) {
    if (!std::isfinite(v)) throw MalformedInputError("non-finite patch feature");
  }
}

PatchFeatureMap PatchFeatureMap::crop(int gy, int gx, int rows, int cols) const {
  if (gy < 0 || gx < 0 || rows < 1 || cols < 1 || gy + rows > grid_h_ || gx + cols > grid_w_) {
    throw DimensionError("feature crop outside the patch grid");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows) * cols * dim_);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto f = feature(gy + r, gx + c);
      out.insert(out.end(), f.begin(), f.end());
    }
  }
  return PatchFeatureMap(rows, cols, dim_, std::move(out));
}

ReferenceEmbedding::ReferenceEmbedding(std::vector<double> vector) : vector_(std::move(vector)) {
  if (vector_.empty()) throw DimensionError("reference embedding needs dim >= 1");
  double sq = 0.0;
  for (double v : vector_) {
    if (!std::isfinite(v)) throw MalformedInputError("non-finite reference embedding");
    sq += v * v;
  }
  if (sq != 0.0 && std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
    throw MalformedInputError("reference embedding must be unit length or zero");
  }
}

bool ReferenceEmbedding::is_zero() const {
  return std::all_of(vector_.begin(), vector_.end(), [](double v) { return v == 0.0; });
}

void check_unit(const CellEmbedding& cell) {
  double sq = 0.0;
  for (double v : cell.vector) {
    if (!std::isfinite(v)) throw MalformedInputError("non-finite cell embedding");
    sq += v * v;
  }
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) throw MalformedInputError("cell embedding must be unit length");
}

void check_instance_set(const InstanceSet& set) {
  if (!set.scores.empty() && set.scores.size() != set.masks.size()) {
    throw DimensionError("instance scores must be empty or one per mask");
  }
  for (const auto& m : set.masks) {
    if (m.height() != set.height || m.width() != set.width) throw DimensionError("instance mask canvas mismatch");
    if (count_pixels(m) == 0) throw EmptyInstanceError("instance set contains an empty mask");
  }
}

InstanceSet instances_from_labels(const LabelMask& mask) {
  InstanceSet set{mask.height(), mask.width(), {}, {}};
  std::vector<BinaryMask> masks(static_cast<std::size_t>(mask.count()), BinaryMask(mask.height(), mask.width(), 0));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (const int l = mask(y, x); l > 0) masks[l - 1](y, x) = 1;
    }
  }
  set.masks = std::move(masks);
  return set;
}

LabelMask labels_from_instances(const InstanceSet& set) {
  check_instance_set(set);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(set.height) * set.width, 0);
  for (std::size_t k = 0; k < set.masks.size(); ++k) {
    auto bits = set.masks[k].values();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (!bits[i]) continue;
      if (labels[i] != 0) throw MalformedInputError("instances overlap; cannot form a label mask");
      labels[i] = static_cast<std::int32_t>(k + 1);
    }
  }
  return LabelMask(set.height, set.width, std::move(labels));
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw DimensionError("iou: canvas mismatch");
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const bool pa = va[i] != 0;
    const bool pb = vb[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void check_threshold_metrics(const ThresholdMetrics& m) {
  if (m.tp < 0 || m.fp < 0 || m.fn < 0) throw std::logic_error("metrics: negative count");
  for (double r : {m.ap, m.precision, m.recall}) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::logic_error("metrics: ratio outside [0,1]");
  }
  if (m.ap > std::min(m.precision, m.recall)) throw std::logic_error("metrics: AP exceeds min(P, R)");
}

}  // namespace percs
