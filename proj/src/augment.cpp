#include <algorithm>
#include <limits>

#include "percs/dataset.hpp"

namespace percs {

void check_mix_params(const MixParams& params) {
  if (params.n_paste_min < 0 || params.n_paste_max < params.n_paste_min) {
    throw ConfigError("n_paste range must satisfy 0 <= min <= max");
  }
  if (params.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

MixResult mix_paste(const Sample& target, std::span<const Donor> donors, const MixParams& params, std::mt19937_64& rng) {
  check_mix_params(params);
  const int h = target.image.height();
  const int w = target.image.width();
  if (target.mask.height() != h || target.mask.width() != w) throw DimensionError("mix_paste: image/mask mismatch");
  for (int l = 1; l <= target.mask.count(); ++l) {
    if (!target.types.contains(l)) throw DataError("mix_paste: type table misses label " + std::to_string(l));
  }

  const int channels = target.image.channels();
  std::vector<float> pixels(target.image.data().begin(), target.image.data().end());
  Grid<std::int64_t> labels(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) labels(y, x) = target.mask(y, x);
  }
  TypeTable types = target.types;
  std::int64_t next_label = target.mask.count() + 1;
  MixResult result;

  for (const auto& donor : donors) {
    if (donor.mask.height() != donor.image.height() || donor.mask.width() != donor.image.width()) {
      throw DimensionError("mix_paste: donor mask does not match its image");
    }
    if (donor.image.channels() != channels) throw DimensionError("mix_paste: donor channel count differs");
    if (donor.type_id < 1) throw DataError("mix_paste: donor type id must be positive");
    int y0 = std::numeric_limits<int>::max(), x0 = y0, y1 = -1, x1 = -1;
    std::vector<Pixel> cell;
    for (int y = 0; y < donor.mask.height(); ++y) {
      for (int x = 0; x < donor.mask.width(); ++x) {
        if (!donor.mask(y, x)) continue;
        cell.push_back({y, x});
        y0 = std::min(y0, y);
        x0 = std::min(x0, x);
        y1 = std::max(y1, y);
        x1 = std::max(x1, x);
      }
    }
    if (cell.empty()) throw EmptyInstanceError("mix_paste: donor mask is empty");
    const int bh = y1 - y0 + 1;
    const int bw = x1 - x0 + 1;
    if (bh > h || bw > w) {
      ++result.skipped;
      continue;
    }

    bool placed = false;
    for (int attempt = 0; attempt < params.max_attempts && !placed; ++attempt) {
      const int oy = std::uniform_int_distribution<int>(0, h - bh)(rng);
      const int ox = std::uniform_int_distribution<int>(0, w - bw)(rng);
      const bool free = params.allow_overlap || std::all_of(cell.begin(), cell.end(), [&](const Pixel& p) {
                          return labels(p.y - y0 + oy, p.x - x0 + ox) == 0;
                        });
      if (!free) continue;
      for (const auto& p : cell) {
        const int ty = p.y - y0 + oy;
        const int tx = p.x - x0 + ox;
        labels(ty, tx) = next_label;
        for (int c = 0; c < channels; ++c) {
          pixels[(static_cast<std::size_t>(ty) * w + tx) * channels + c] = donor.image.at(p.y, p.x, c);
        }
      }
      types[static_cast<int>(next_label)] = donor.type_id;
      ++next_label;
      ++result.pasted;
      placed = true;
    }
    if (!placed) ++result.skipped;
  }

  // Overlapping pastes can erase earlier instances; relabel in rank order and carry the types along.
  LabelMask mask = validate_label_mask(labels);
  TypeTable remapped;
  std::vector<char> present(static_cast<std::size_t>(next_label), 0);
  for (auto v : labels.values()) present[static_cast<std::size_t>(v)] = 1;
  int rank = 0;
  for (std::int64_t l = 1; l < next_label; ++l) {
    if (present[static_cast<std::size_t>(l)]) remapped[++rank] = types.at(static_cast<int>(l));
  }
  result.sample = Sample{Image(h, w, channels, std::move(pixels)), std::move(mask), std::move(remapped)};
  return result;
}

ReferenceChoice select_reference(const ManifestEntry& entry, const LabelMask& mask, const TypeTable& types,
                                 ReferenceMode mode, std::mt19937_64* rng) {
  if (mask.count() == 0) throw ProtocolError("entry " + entry.id + ": mask has no instances to reference");
  int label = 0;
  if (mode == ReferenceMode::eval) {
    if (!entry.fixed_reference) throw ProtocolError("entry " + entry.id + ": eval mode needs a fixed_reference");
    label = *entry.fixed_reference;
    if (label < 1 || label > mask.count()) {
      throw ProtocolError("entry " + entry.id + ": fixed_reference " + std::to_string(label) + " is not in the mask");
    }
  } else {
    if (!rng) throw ProtocolError("train-mode reference selection needs a seeded generator");
    label = std::uniform_int_distribution<int>(1, mask.count())(*rng);
  }
  auto it = types.find(label);
  if (it == types.end()) throw DataError("entry " + entry.id + ": no type for reference label");
  return {label, it->second};
}

BinaryMask target_mask_for_reference(const LabelMask& mask, const TypeTable& types, int ref_type) {
  std::vector<char> keep(static_cast<std::size_t>(mask.count()) + 1, 0);
  for (int l = 1; l <= mask.count(); ++l) {
    auto it = types.find(l);
    if (it == types.end() || it->second < 1) {
      throw DataError("type table has no valid type for label " + std::to_string(l));
    }
    keep[l] = it->second == ref_type;
  }
  BinaryMask out(mask.height(), mask.width(), 0);
  auto src = mask.grid().values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = keep[src[i]];
  return out;
}

LabelMask reference_instances(const LabelMask& mask, const TypeTable& types, int ref_type) {
  const BinaryMask keep = target_mask_for_reference(mask, types, ref_type);
  std::vector<std::int64_t> raw(mask.grid().size(), 0);
  auto src = mask.grid().values();
  for (std::size_t i = 0; i < src.size(); ++i) raw[i] = keep.values()[i] ? src[i] : 0;
  return validate_label_mask(mask.height(), mask.width(), raw);
}

}  // namespace percs
