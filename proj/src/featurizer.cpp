#include <algorithm>
#include <cmath>

#include "percs/model_head.hpp"

namespace percs {

PatchFeatureMap toy_featurizer(const Image& image, int patch_size, int dim) {
  if (patch_size < 1 || dim < 1) throw ConfigError("toy_featurizer: patch size and dim must be >= 1");
  if (image.height() % patch_size != 0 || image.width() % patch_size != 0) {
    throw DimensionError("toy_featurizer: image dimensions must be divisible by the patch size");
  }
  const int gh = image.height() / patch_size;
  const int gw = image.width() / patch_size;
  const int bins = std::max(dim - 4, 1);
  const double area = static_cast<double>(patch_size) * patch_size;
  const double stat_scale = 1.0 / patch_size;

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(gh) * gw * dim);
  std::vector<double> full(4 + static_cast<std::size_t>(bins));
  std::vector<double> gray(static_cast<std::size_t>(patch_size) * patch_size);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          gray[y * patch_size + x] = image.gray(gy * patch_size + y, gx * patch_size + x);
        }
      }
      std::fill(full.begin(), full.end(), 0.0);
      double sum = 0.0;
      for (double v : gray) sum += v;
      const double mean = sum / area;
      double var = 0.0;
      for (double v : gray) var += (v - mean) * (v - mean);
      var /= area;
      double grad_x = 0.0;
      double grad_y = 0.0;
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          const double v = gray[y * patch_size + x];
          if (x + 1 < patch_size) grad_x += std::abs(gray[y * patch_size + x + 1] - v);
          if (y + 1 < patch_size) grad_y += std::abs(gray[(y + 1) * patch_size + x] - v);
          const int b = std::min(static_cast<int>(v * bins), bins - 1);
          full[4 + b] += v / area;
        }
      }
      const double pairs = patch_size > 1 ? static_cast<double>(patch_size) * (patch_size - 1) : 1.0;
      full[0] = mean * stat_scale;
      full[1] = std::sqrt(var) * stat_scale;
      full[2] = grad_x / pairs * stat_scale;
      full[3] = grad_y / pairs * stat_scale;
      out.insert(out.end(), full.begin(), full.begin() + dim);
    }
  }
  return PatchFeatureMap(gh, gw, dim, std::move(out));
}

ToyFeaturizer::ToyFeaturizer(int patch_size, int dim) : patch_size_(patch_size), dim_(dim) {
  if (patch_size < 1 || dim < 1) throw ConfigError("ToyFeaturizer: patch size and dim must be >= 1");
}

int implied_patch_size(const PatchFeatureMap& features, int height, int width) {
  if (height % features.grid_h() != 0 || width % features.grid_w() != 0) {
    throw DimensionError("mask canvas is not a whole multiple of the feature grid");
  }
  const int p = height / features.grid_h();
  if (width / features.grid_w() != p) throw DimensionError("mask canvas implies non-square patches");
  return p;
}

ReferenceEmbedding masked_mean_embedding(const PatchFeatureMap& features, const BinaryMask& mask) {
  const int p = implied_patch_size(features, mask.height(), mask.width());
  std::vector<double> acc(static_cast<std::size_t>(features.dim()), 0.0);
  std::int64_t covered = 0;
  const double area = static_cast<double>(p) * p;
  for (int gy = 0; gy < features.grid_h(); ++gy) {
    for (int gx = 0; gx < features.grid_w(); ++gx) {
      int n = 0;
      for (int y = gy * p; y < (gy + 1) * p; ++y) {
        for (int x = gx * p; x < (gx + 1) * p; ++x) n += mask(y, x) != 0;
      }
      if (n == 0) continue;
      covered += n;
      const double weight = n / area;
      auto f = features.feature(gy, gx);
      for (int d = 0; d < features.dim(); ++d) acc[d] += weight * f[d];
    }
  }
  if (covered == 0) throw EmptyReferenceError("masked_mean_embedding: empty mask");
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw EmptyReferenceError("masked_mean_embedding: masked features are all zero");
  for (double& v : acc) v /= norm;
  return ReferenceEmbedding(std::move(acc));
}

RealGrid cosine_similarity_map(const PatchFeatureMap& features, const ReferenceEmbedding& ref) {
  if (ref.dim() != features.dim()) throw DimensionError("cosine_similarity_map: feature and reference dims differ");
  if (ref.is_zero()) throw EmptyReferenceError("cosine_similarity_map: empty reference");
  RealGrid sim(features.grid_h(), features.grid_w(), 0.0);
  auto r = ref.vector();
  for (int gy = 0; gy < features.grid_h(); ++gy) {
    for (int gx = 0; gx < features.grid_w(); ++gx) {
      auto f = features.feature(gy, gx);
      double dot = 0.0;
      double sq = 0.0;
      for (int d = 0; d < features.dim(); ++d) {
        dot += f[d] * r[d];
        sq += f[d] * f[d];
      }
      sim(gy, gx) = sq > 0.0 ? std::clamp(dot / std::sqrt(sq), -1.0, 1.0) : 0.0;
    }
  }
  return sim;
}

}  // namespace percs
