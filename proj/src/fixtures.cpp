#include <algorithm>
#include <cmath>
#include <numbers>

#include "percs/dataset.hpp"
#include "percs/png_io.hpp"

namespace percs {
namespace {

constexpr double kBackgroundLevel = 0.05;
constexpr double kBackgroundNoise = 0.02;
constexpr int kPlacementAttempts = 200;
constexpr double kGap = 2.0;  // minimum clearance between blobs, pixels

struct Ellipse {
  double cy, cx, ry, rx, angle;

  // <= 1 inside; `grow` inflates both semi-axes.
  double level(int y, int x, double grow = 0.0) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (dy * c + dx * s) / (ry + grow);
    const double v = (-dy * s + dx * c) / (rx + grow);
    return u * u + v * v;
  }
};

}  // namespace

void check_synth_spec(const SynthSpec& spec) {
  if (spec.n_images < 1) throw ConfigError("n_images must be >= 1");
  if (spec.height < 8 || spec.width < 8) throw ConfigError("fixture canvas must be at least 8x8");
  if (spec.min_blobs < 1 || spec.max_blobs < spec.min_blobs) throw ConfigError("blob counts need 1 <= min <= max");
  if (!(spec.min_radius >= 1.0) || spec.max_radius < spec.min_radius) {
    throw ConfigError("radii need 1 <= min <= max");
  }
  if (2.0 * (spec.max_radius + kGap) + 2.0 > std::min(spec.height, spec.width)) {
    throw ConfigError("max_radius too large for the canvas");
  }
  if (spec.n_types < 1 || spec.n_types > 108) throw ConfigError("n_types must lie in 1..108");
}

double type_intensity(int type_id, int n_types) {
  if (n_types <= 1) return 0.6;
  return 0.3 + 0.6 * static_cast<double>(type_id - 1) / static_cast<double>(n_types - 1);
}

double type_texture(int type_id) { return 0.02 + 0.01 * ((type_id - 1) % 3); }

SynthScene synth_scene(const SynthSpec& spec, std::mt19937_64& rng) {
  check_synth_spec(spec);
  const int h = spec.height;
  const int w = spec.width;
  std::uniform_int_distribution<int> blob_count(spec.min_blobs, spec.max_blobs);
  std::uniform_real_distribution<double> radius(spec.min_radius, spec.max_radius);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_int_distribution<int> type_pick(1, spec.n_types);
  std::normal_distribution<double> noise(0.0, 1.0);

  SynthScene scene;
  scene.requested_blobs = blob_count(rng);
  const double margin = spec.max_radius + kGap + 1.0;
  std::uniform_real_distribution<double> cy_pick(margin, h - 1 - margin);
  std::uniform_real_distribution<double> cx_pick(margin, w - 1 - margin);

  Grid<std::int64_t> labels(h, w, 0);
  std::vector<Ellipse> blobs;
  std::vector<int> types;
  for (int b = 0; b < scene.requested_blobs; ++b) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const Ellipse e{cy_pick(rng), cx_pick(rng), radius(rng), radius(rng), angle(rng)};
      const int type = type_pick(rng);
      const double reach = std::max(e.ry, e.rx) + kGap + 1.0;
      const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - reach)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(e.cy + reach)));
      const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - reach)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(e.cx + reach)));
      bool clear = true;
      for (int y = y0; y <= y1 && clear; ++y) {
        for (int x = x0; x <= x1 && clear; ++x) clear = !(labels(y, x) != 0 && e.level(y, x, kGap) <= 1.0);
      }
      if (!clear) continue;
      const std::int64_t label = static_cast<std::int64_t>(blobs.size()) + 1;
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (e.level(y, x) <= 1.0) labels(y, x) = label;
        }
      }
      blobs.push_back(e);
      types.push_back(type);
      break;
    }
  }

  std::vector<float> pixels(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto l = labels(y, x);
      const double base = l == 0 ? kBackgroundLevel : type_intensity(types[l - 1], spec.n_types);
      const double amp = l == 0 ? kBackgroundNoise : type_texture(types[l - 1]);
      pixels[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::clamp(base + amp * noise(rng), 0.0, 1.0));
    }
  }
  // A blob can rasterize to nothing only if it is degenerate; validate drops such gaps.
  scene.sample.mask = validate_label_mask(labels);
  scene.sample.image = Image(h, w, 1, std::move(pixels));
  std::vector<char> present(blobs.size() + 1, 0);
  for (auto v : labels.values()) present[static_cast<std::size_t>(v)] = 1;
  int rank = 0;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    if (present[i + 1]) scene.sample.types[++rank] = types[i];
  }
  return scene;
}

FixtureSet synth_fixtures(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  check_synth_spec(spec);
  std::mt19937_64 rng(spec.seed);
  FixtureSet out;
  for (int i = 0; i < spec.n_images; ++i) {
    SynthScene scene = synth_scene(spec, rng);
    char id[32];
    std::snprintf(id, sizeof id, "img%04d", i);
    if (scene.sample.mask.count() < scene.requested_blobs) {
      out.warnings.push_back(std::string(id) + ": packing infeasible, placed " +
                             std::to_string(scene.sample.mask.count()) + " of " +
                             std::to_string(scene.requested_blobs) + " blobs");
    }
    if (scene.sample.mask.count() == 0) throw DataError(std::string(id) + ": no blob could be placed");
    ManifestEntry e;
    e.id = id;
    e.image = std::string("images/") + id + ".png";
    e.mask = std::string("masks/") + id + ".png";
    e.split = Split::test;
    e.fixed_reference = 1;
    e.cell_type = scene.sample.types.at(1);
    e.instance_types = scene.sample.types;
    write_png_image(out_dir / e.image, scene.sample.image);
    write_label_mask(out_dir / e.mask, scene.sample.mask);
    out.manifest.entries.push_back(std::move(e));
  }
  save_manifest(out_dir / "manifest.json", out.manifest);
  return out;
}

}  // namespace percs
