#include "percs/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace percs {
namespace {

constexpr double kGradientEpsilon = 1e-12;

Pixel center_of(const std::vector<Pixel>& pixels) {
  if (pixels.empty()) throw EmptyInstanceError("instance_center: empty mask");
  std::vector<int> ys, xs;
  ys.reserve(pixels.size());
  xs.reserve(pixels.size());
  for (const auto& p : pixels) {
    ys.push_back(p.y);
    xs.push_back(p.x);
  }
  auto median = [](std::vector<int>& v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    const double upper = v[n / 2];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + n / 2);
    return 0.5 * (lower + upper);
  };
  const double my = median(ys);
  const double mx = median(xs);
  Pixel best = pixels.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : pixels) {
    const double d = (p.y - my) * (p.y - my) + (p.x - mx) * (p.x - mx);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

struct Box {
  int y0 = std::numeric_limits<int>::max();
  int x0 = std::numeric_limits<int>::max();
  int y1 = -1;
  int x1 = -1;
  int height() const { return y1 - y0 + 1; }
  int width() const { return x1 - x0 + 1; }
};

// Diffusion and gradient for one instance, in bounding-box local coordinates.
void instance_flow(const std::vector<Pixel>& pixels, const Box& box, FlowField& flow, RealGrid& heat_out) {
  const int h = box.height();
  const int w = box.width();
  Grid<std::uint8_t> inside(h, w, 0);
  for (const auto& p : pixels) inside(p.y - box.y0, p.x - box.x0) = 1;

  const Pixel c = center_of(pixels);
  const int cy = c.y - box.y0;
  const int cx = c.x - box.x0;

  RealGrid heat(h, w, 0.0);
  RealGrid next(h, w, 0.0);
  const int iterations = diffusion_iterations(h, w);
  constexpr int kDy[4] = {-1, 1, 0, 0};
  constexpr int kDx[4] = {0, 0, -1, 1};
  for (int it = 0; it < iterations; ++it) {
    heat(cy, cx) += 1.0;
    for (const auto& p : pixels) {
      const int y = p.y - box.y0;
      const int x = p.x - box.x0;
      // Out-of-mask neighbours count as zero: heat drains through the boundary,
      // which keeps the source the maximum even in tiny shapes.
      double sum = heat(y, x);
      for (int k = 0; k < 4; ++k) {
        const int ny = y + kDy[k];
        const int nx = x + kDx[k];
        if (inside.contains(ny, nx) && inside(ny, nx)) sum += heat(ny, nx);
      }
      next(y, x) = sum / 5.0;
    }
    std::swap(heat, next);
  }

  RealGrid log_heat(h, w, 0.0);
  for (const auto& p : pixels) {
    const int y = p.y - box.y0;
    const int x = p.x - box.x0;
    log_heat(y, x) = std::log1p(heat(y, x));
    heat_out(p.y, p.x) = heat(y, x);
  }

  auto in = [&](int y, int x) { return inside.contains(y, x) && inside(y, x) != 0; };
  // Central differences where both neighbours are in-mask, one-sided toward the in-mask neighbour otherwise.
  auto derivative = [&](int y, int x, int sy, int sx) {
    const bool back = in(y - sy, x - sx);
    const bool fwd = in(y + sy, x + sx);
    if (back && fwd) return 0.5 * (log_heat(y + sy, x + sx) - log_heat(y - sy, x - sx));
    if (fwd) return log_heat(y + sy, x + sx) - log_heat(y, x);
    if (back) return log_heat(y, x) - log_heat(y - sy, x - sx);
    return 0.0;
  };
  for (const auto& p : pixels) {
    const int y = p.y - box.y0;
    const int x = p.x - box.x0;
    const double gy = derivative(y, x, 1, 0);
    const double gx = derivative(y, x, 0, 1);
    const double norm = std::hypot(gy, gx);
    if (norm > kGradientEpsilon) {
      flow.dy(p.y, p.x) = gy / norm;
      flow.dx(p.y, p.x) = gx / norm;
    }
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void check_params(const ReconstructionParams& params) {
  if (!(params.step_size > 0.0)) throw ConfigError("step_size must be > 0");
  if (params.n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (!(params.prob_threshold > 0.0 && params.prob_threshold < 1.0)) {
    throw ConfigError("prob_threshold must lie in (0,1)");
  }
  if (params.min_size < 0) throw ConfigError("min_size must be >= 0");
  if (params.merge_radius < 1) throw ConfigError("merge_radius must be >= 1");
}

Pixel instance_center(const BinaryMask& mask) {
  std::vector<Pixel> pixels;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(y, x)) pixels.push_back({y, x});
    }
  }
  return center_of(pixels);
}

int diffusion_iterations(int bbox_height, int bbox_width) {
  return 2 * std::max(bbox_height, bbox_width) + 10;
}

GtFlows compute_gt_flows(const LabelMask& mask) {
  const int k = mask.count();
  std::vector<std::vector<Pixel>> pixels(static_cast<std::size_t>(k) + 1);
  std::vector<Box> boxes(static_cast<std::size_t>(k) + 1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const int l = mask(y, x);
      if (l == 0) continue;
      pixels[l].push_back({y, x});
      Box& b = boxes[l];
      b.y0 = std::min(b.y0, y);
      b.x0 = std::min(b.x0, x);
      b.y1 = std::max(b.y1, y);
      b.x1 = std::max(b.x1, x);
    }
  }
  GtFlows out{FlowField(mask.height(), mask.width()), RealGrid(mask.height(), mask.width(), 0.0)};
  for (int l = 1; l <= k; ++l) instance_flow(pixels[l], boxes[l], out.flow, out.heat);
  return out;
}

LabelMask relabel_sequential(const Grid<std::int32_t>& labels) {
  std::unordered_map<std::int32_t, std::int32_t> remap;
  std::vector<std::int32_t> out(labels.size(), 0);
  auto src = labels.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0) throw MalformedInputError("negative label");
    if (src[i] == 0) continue;
    auto [it, inserted] = remap.emplace(src[i], static_cast<std::int32_t>(remap.size() + 1));
    out[i] = it->second;
  }
  return LabelMask(labels.height(), labels.width(), std::move(out));
}

LabelMask follow_flows(const FlowField& flow, const LogitMap& logits, const ReconstructionParams& params) {
  check_params(params);
  if (!flow.dy.same_shape(flow.dx) || !flow.dy.same_shape(logits)) {
    throw DimensionError("follow_flows: flow and logits canvases differ");
  }
  const int h = flow.height();
  const int w = flow.width();

  std::vector<Pixel> seeds;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (sigmoid(logits(y, x)) > params.prob_threshold) seeds.push_back({y, x});
    }
  }
  if (seeds.empty()) return LabelMask::background(h, w);

  auto clamp_round = [](double v, int hi) { return std::clamp(static_cast<int>(std::lround(v)), 0, hi); };

  std::vector<Pixel> ends;
  ends.reserve(seeds.size());
  for (const auto& s : seeds) {
    double py = s.y;
    double px = s.x;
    for (int step = 0; step < params.n_steps; ++step) {
      const int iy = clamp_round(py, h - 1);
      const int ix = clamp_round(px, w - 1);
      const double vy = flow.dy(iy, ix);
      const double vx = flow.dx(iy, ix);
      const double norm = std::hypot(vy, vx);
      if (!(norm > kGradientEpsilon)) break;
      py = std::clamp(py + params.step_size * vy / norm, 0.0, static_cast<double>(h - 1));
      px = std::clamp(px + params.step_size * vx / norm, 0.0, static_cast<double>(w - 1));
    }
    ends.push_back({clamp_round(py, h - 1), clamp_round(px, w - 1)});
  }

  // Occupancy grid dilated by a disk of radius merge_radius.
  Grid<std::uint8_t> occupied(h, w, 0);
  for (const auto& e : ends) occupied(e.y, e.x) = 1;
  Grid<std::uint8_t> dilated(h, w, 0);
  const int r = params.merge_radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!occupied(y, x)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dy * dy + dx * dx > r * r || !dilated.contains(y + dy, x + dx)) continue;
          dilated(y + dy, x + dx) = 1;
        }
      }
    }
  }

  // 8-connected components of the dilated grid.
  Grid<std::int32_t> component(h, w, 0);
  std::int32_t n_components = 0;
  std::vector<Pixel> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!dilated(y, x) || component(y, x) != 0) continue;
      ++n_components;
      component(y, x) = n_components;
      stack.push_back({y, x});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = p.y + dy;
            const int nx = p.x + dx;
            if (!dilated.contains(ny, nx) || !dilated(ny, nx) || component(ny, nx) != 0) continue;
            component(ny, nx) = n_components;
            stack.push_back({ny, nx});
          }
        }
      }
    }
  }

  Grid<std::int32_t> labels(h, w, 0);
  for (std::size_t i = 0; i < seeds.size(); ++i) labels(seeds[i].y, seeds[i].x) = component(ends[i].y, ends[i].x);
  const LabelMask clustered = relabel_sequential(labels);
  return relabel_sequential(remove_small_instances(clustered, params.min_size).grid());
}

LabelMask remove_small_instances(const LabelMask& mask, int min_size) {
  if (min_size <= 0) return mask;
  const auto areas = mask.areas();
  std::vector<std::int64_t> kept(mask.grid().size(), 0);
  auto src = mask.grid().values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != 0 && areas[src[i]] >= min_size) kept[i] = src[i];
  }
  return validate_label_mask(mask.height(), mask.width(), kept);
}

}  // namespace percs
