#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "percs/core.hpp"

namespace percs {

enum class Split { train, test, novel };

std::string to_string(Split split);
Split parse_split(const std::string& text);

/// Instance label -> cell type id.
using TypeTable = std::map<int, int>;

struct ManifestEntry {
  std::string id;
  std::string image;  // relative to the manifest directory
  std::string mask;
  int cell_type = 0;
  Split split = Split::train;
  std::optional<int> fixed_reference;
  /// Per-instance types for mixed images; empty means every instance has `cell_type`.
  TypeTable instance_types;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry& find(const std::string& id) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Parses and validates manifest JSON. Errors name the offending entry index.
DatasetManifest parse_manifest(const std::string& json_text);
/// parse_manifest plus a check that every referenced image and mask exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Throws SchemaError when an entry breaks a manifest invariant.
void validate_manifest(const DatasetManifest& manifest);

/// Type of every label 1..K of `mask`; throws DataError when the table does not cover them.
TypeTable type_table_for(const ManifestEntry& entry, const LabelMask& mask);

struct Sample {
  Image image;
  LabelMask mask;
  TypeTable types;
};

/// A single donor cell: its source image and the cell's mask on that canvas.
struct Donor {
  Image image;
  BinaryMask mask;
  int type_id = 0;
};

struct MixParams {
  int n_paste_min = 1;
  int n_paste_max = 5;
  int max_attempts = 20;
  bool allow_overlap = false;
  std::uint64_t rng_seed = 0;
};

void check_mix_params(const MixParams& params);

struct MixResult {
  Sample sample;
  int pasted = 0;
  int skipped = 0;
};

/// Pastes every donor cell (hard edges) at a uniformly drawn translation. Without
/// allow_overlap a placement touching existing foreground is retried up to
/// max_attempts times, then the donor is skipped. New labels are appended.
MixResult mix_paste(const Sample& target, std::span<const Donor> donors, const MixParams& params, std::mt19937_64& rng);

enum class ReferenceMode { train, eval };

struct ReferenceChoice {
  int label = 0;
  int type_id = 0;
};

/// Train: uniform over instance labels from `rng`. Eval: the entry's fixed reference,
/// without touching `rng`.
ReferenceChoice select_reference(const ManifestEntry& entry, const LabelMask& mask, const TypeTable& types,
                                 ReferenceMode mode, std::mt19937_64* rng = nullptr);

/// Union of all instances whose type equals `ref_type`.
BinaryMask target_mask_for_reference(const LabelMask& mask, const TypeTable& types, int ref_type);

/// Instances of `ref_type` only, relabelled 1..K' in label order.
LabelMask reference_instances(const LabelMask& mask, const TypeTable& types, int ref_type);

struct SynthSpec {
  int n_images = 1;
  int height = 336;
  int width = 336;
  int min_blobs = 1;
  int max_blobs = 10;
  double min_radius = 6.0;
  double max_radius = 12.0;
  int n_types = 2;
  std::uint64_t seed = 0;
};

void check_synth_spec(const SynthSpec& spec);

/// Mean foreground intensity rendered for a cell type.
double type_intensity(int type_id, int n_types);
/// Per-pixel noise amplitude of a cell type.
double type_texture(int type_id);

struct SynthScene {
  Sample sample;
  int requested_blobs = 0;
};

/// Non-touching random ellipses, each assigned a uniformly drawn type, rendered
/// on a dark noisy background.
SynthScene synth_scene(const SynthSpec& spec, std::mt19937_64& rng);

struct FixtureSet {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

/// Writes images/<id>.png, masks/<id>.png and manifest.json under `out_dir`.
FixtureSet synth_fixtures(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace percs
