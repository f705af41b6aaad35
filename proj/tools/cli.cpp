#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>

#include "CLI11.hpp"

#include "percs/baseline_filter.hpp"
#include "percs/dataset.hpp"
#include "percs/eval.hpp"
#include "percs/file_util.hpp"
#include "percs/flows.hpp"
#include "percs/model_head.hpp"
#include "percs/pipeline.hpp"
#include "percs/png_io.hpp"

namespace percs::cli {
namespace {

namespace fs = std::filesystem;

/// Raised for bad flag combinations detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const char* command) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PERCS_SEED"); env && *env) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(env, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || env[used] != '\0') throw UsageError("PERCS_SEED is not an unsigned integer");
    return v;
  }
  throw UsageError(std::string(command) + " is randomized: pass --seed or set PERCS_SEED");
}

void add_recon_flags(CLI::App* app, ReconstructionParams& p) {
  app->add_option("--step-size", p.step_size, "Euler step length in pixels")->capture_default_str();
  app->add_option("--n-steps", p.n_steps, "Euler steps per pixel")->capture_default_str();
  app->add_option("--prob-threshold", p.prob_threshold, "foreground probability cutoff")->capture_default_str();
  app->add_option("--min-size", p.min_size, "smallest instance kept, in pixels")->capture_default_str();
  app->add_option("--merge-radius", p.merge_radius, "end-point clustering radius")->capture_default_str();
}

// ---------------------------------------------------------------------------

struct FixturesArgs {
  SynthSpec spec;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string weights_out;
  int feature_dim = 32;
};

int cmd_fixtures(FixturesArgs a, std::ostream& out, std::ostream& err) {
  a.spec.seed = resolve_seed(a.seed, "fixtures");
  const FixtureSet set = synth_fixtures(a.spec, a.out_dir);
  for (const auto& w : set.warnings) err << "warning: " << w << "\n";
  if (!a.weights_out.empty()) save_head_weights(a.weights_out, init_head_weights(a.feature_dim, a.spec.seed));
  out << "wrote " << set.manifest.entries.size() << " fixture(s) to " << a.out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FlowsArgs {
  std::string mask;
  std::string out;
};

int cmd_flows(const FlowsArgs& a, std::ostream& out) {
  const LabelMask mask = read_label_mask(a.mask);
  const GtFlows gt = compute_gt_flows(mask);
  check_flow_field(gt.flow, mask);
  write_flow_file(a.out, gt.flow);
  out << "wrote flows for " << mask.count() << " instance(s) to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string manifest;
  std::string id;
  std::string weights;
  bool gt_flows = false;
  std::optional<int> reference;
  std::string out_mask;
  std::string out_overlay;
  TilingConfig tiling;
  int patch_size = 14;
  int feature_dim = 32;
  double filter_threshold = kDefaultFilterThreshold;
  bool no_filter = false;
  bool pad = false;
  ReconstructionParams recon;
};

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
  if (a.weights.empty() == !a.gt_flows) throw UsageError("segment needs exactly one of --weights or --gt-flows");
  const fs::path manifest_path(a.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const ManifestEntry& entry = manifest.find(a.id);
  const fs::path root = manifest_path.parent_path();

  const Image original = read_png_image(root / entry.image);
  const LabelMask gt = read_label_mask(root / entry.mask);
  if (gt.height() != original.height() || gt.width() != original.width()) {
    throw DimensionError("entry " + entry.id + ": image and mask sizes differ");
  }
  const int ref_label = a.reference ? *a.reference : entry.fixed_reference.value_or(0);
  if (ref_label < 1 || ref_label > gt.count()) {
    throw UsageError("entry " + entry.id + ": no valid reference label (pass --reference)");
  }

  const int h0 = original.height();
  const int w0 = original.width();
  const bool fits = h0 >= a.tiling.window && w0 >= a.tiling.window && h0 % a.patch_size == 0 && w0 % a.patch_size == 0;
  if (!fits && !a.pad) {
    throw UsageError("image " + std::to_string(h0) + "x" + std::to_string(w0) + " must be at least the window (" +
                     std::to_string(a.tiling.window) + ") and divisible by the patch size (" +
                     std::to_string(a.patch_size) + "); rerun with --pad to reflect-pad it");
  }
  const Image image = reflect_pad(original, a.tiling.window, a.tiling.window, a.patch_size);
  const LabelMask gt_padded = pad_labels(gt, image.height(), image.width());

  const PatchFeatureMap features = toy_featurizer(image, a.patch_size, a.feature_dim);
  const ReferenceEmbedding ref = masked_mean_embedding(features, gt_padded.instance(ref_label));

  ChannelStack maps;
  if (a.gt_flows) {
    maps = tiled_gt_maps(gt_padded, a.tiling);
  } else {
    const HeadWeights weights = load_head_weights(a.weights);
    if (weights.feature_dim != a.feature_dim) {
      throw UsageError("weights expect feature dim " + std::to_string(weights.feature_dim) + ", featurizer gives " +
                       std::to_string(a.feature_dim));
    }
    maps = tiled_head_maps(features, ref, weights, image.height(), image.width(), a.tiling);
  }
  LabelMask labels = reconstruct(maps, a.recon);
  const int before = labels.count();
  if (!a.no_filter) labels = filter_labels(labels, features, ref, a.filter_threshold);
  labels = crop_labels(labels, h0, w0);

  write_label_mask(a.out_mask, labels);
  if (!a.out_overlay.empty()) {
    write_png_rgb(a.out_overlay, h0, w0, render_overlay(original, labels, gt.instance(ref_label)));
  }
  out << entry.id << ": " << labels.count() << " instance(s) kept of " << before << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred_dir;
  std::string manifest;
  std::vector<double> thresholds = kDefaultIouThresholds;
  std::string out;
  bool all_instances = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  for (double t : a.thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw UsageError("IoU thresholds must lie in (0,1)");
  }
  const fs::path manifest_path(a.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  std::vector<ImageMetrics> per_image;
  for (const auto& entry : manifest.entries) {
    if (entry.split == Split::train) continue;
    const LabelMask mask = read_label_mask(root / entry.mask);
    LabelMask target = mask;
    if (!a.all_instances) {
      const TypeTable types = type_table_for(entry, mask);
      const ReferenceChoice ref = select_reference(entry, mask, types, ReferenceMode::eval);
      target = reference_instances(mask, types, ref.type_id);
    }
    const fs::path pred_path = fs::path(a.pred_dir) / (entry.id + ".png");
    if (!fs::exists(pred_path)) throw DataError("missing prediction " + pred_path.string());
    const LabelMask pred = read_label_mask(pred_path);
    if (pred.height() != target.height() || pred.width() != target.width()) {
      throw DimensionError("prediction " + pred_path.string() + " does not match the mask size");
    }
    per_image.push_back(evaluate(pred, target, a.thresholds, entry.id));
  }
  if (per_image.empty()) throw DataError("manifest has no test or novel entries to evaluate");
  const std::string json = metrics_to_json(aggregate(std::move(per_image)));
  if (a.out.empty()) {
    out << json;
  } else {
    write_atomic(a.out, json);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct MixArgs {
  std::string manifest;
  std::string out_dir;
  MixParams params;
  std::optional<std::uint64_t> seed;
};

struct DonorSource {
  std::size_t entry;
  int label;
  int type_id;
};

int cmd_mix(MixArgs a, std::ostream& out, std::ostream& err) {
  a.params.rng_seed = resolve_seed(a.seed, "mix");
  check_mix_params(a.params);
  const fs::path manifest_path(a.manifest);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  const fs::path out_dir(a.out_dir);

  std::vector<Sample> samples;
  std::vector<DonorSource> pool;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    Sample s{read_png_image(root / e.image), read_label_mask(root / e.mask), {}};
    s.types = type_table_for(e, s.mask);
    for (const auto& [label, type] : s.types) pool.push_back({i, label, type});
    samples.push_back(std::move(s));
  }

  std::mt19937_64 rng(a.params.rng_seed);
  DatasetManifest extended;
  fs::create_directories(out_dir);
  const fs::path back = fs::relative(fs::absolute(root), fs::absolute(out_dir));
  for (auto e : manifest.entries) {
    e.image = (back / e.image).lexically_normal().generic_string();
    e.mask = (back / e.mask).lexically_normal().generic_string();
    extended.entries.push_back(std::move(e));
  }

  int written = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    const Sample& target = samples[i];
    int ref_type = entry.cell_type;
    if (entry.fixed_reference && target.types.contains(*entry.fixed_reference)) {
      ref_type = target.types.at(*entry.fixed_reference);
    }
    std::vector<const DonorSource*> candidates;
    for (const auto& d : pool) {
      if (d.entry != i && d.type_id != ref_type) candidates.push_back(&d);
    }
    const int n = std::uniform_int_distribution<int>(a.params.n_paste_min, a.params.n_paste_max)(rng);
    std::vector<Donor> donors;
    if (!candidates.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      for (int k = 0; k < n; ++k) {
        const DonorSource& d = *candidates[pick(rng)];
        const Sample& src = samples[d.entry];
        if (src.image.channels() != target.image.channels()) continue;
        donors.push_back({src.image, src.mask.instance(d.label), d.type_id});
      }
    } else if (n > 0) {
      err << "warning: " << entry.id << ": no donor cells of another type\n";
    }
    const MixResult mixed = mix_paste(target, donors, a.params, rng);
    if (mixed.skipped > 0) err << "warning: " << entry.id << ": skipped " << mixed.skipped << " donor(s)\n";

    ManifestEntry e = entry;
    e.id = entry.id + "_mix";
    e.image = "images/" + e.id + ".png";
    e.mask = "masks/" + e.id + ".png";
    e.instance_types = mixed.sample.types;
    if (entry.fixed_reference) {
      // Overlapping pastes may erase or renumber the reference; drop such samples.
      const int ref = *entry.fixed_reference;
      const bool intact = ref <= mixed.sample.mask.count() && mixed.sample.mask.instance(ref) == target.mask.instance(ref);
      if (!intact) {
        err << "warning: " << entry.id << ": reference cell was overwritten, sample dropped\n";
        continue;
      }
    }
    write_png_image(out_dir / e.image, mixed.sample.image);
    write_label_mask(out_dir / e.mask, mixed.sample.mask);
    extended.entries.push_back(std::move(e));
    ++written;
  }
  save_manifest(out_dir / "manifest.json", extended);
  out << "wrote " << written << " mixed sample(s) to " << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized cell segmentation toolkit"};
  app.require_subcommand(1);

  FixturesArgs fx;
  auto* fixtures = app.add_subcommand("fixtures", "generate synthetic images, masks and a manifest");
  fixtures->add_option("--out", fx.out_dir, "output directory")->required();
  fixtures->add_option("--n-images", fx.spec.n_images)->capture_default_str();
  fixtures->add_option("--height", fx.spec.height)->capture_default_str();
  fixtures->add_option("--width", fx.spec.width)->capture_default_str();
  fixtures->add_option("--min-blobs", fx.spec.min_blobs)->capture_default_str();
  fixtures->add_option("--max-blobs", fx.spec.max_blobs)->capture_default_str();
  fixtures->add_option("--min-radius", fx.spec.min_radius)->capture_default_str();
  fixtures->add_option("--max-radius", fx.spec.max_radius)->capture_default_str();
  fixtures->add_option("--n-types", fx.spec.n_types)->capture_default_str();
  fixtures->add_option("--seed", fx.seed, "RNG seed (falls back to PERCS_SEED)");
  fixtures->add_option("--weights-out", fx.weights_out, "also write seeded head weights here");
  fixtures->add_option("--feature-dim", fx.feature_dim, "feature dim of the written weights")->capture_default_str();

  FlowsArgs fl;
  auto* flows = app.add_subcommand("flows", "compute ground-truth flows of a label mask");
  flows->add_option("--mask", fl.mask, "16-bit label PNG")->required();
  flows->add_option("--out", fl.out, "PCSF flow file")->required();

  SegmentArgs sg;
  auto* segment = app.add_subcommand("segment", "segment cells of the reference's type");
  segment->add_option("--manifest", sg.manifest)->required();
  segment->add_option("--id", sg.id, "manifest entry id")->required();
  segment->add_option("--weights", sg.weights, "head weights file");
  segment->add_flag("--gt-flows", sg.gt_flows, "bypass the head with ground-truth flows");
  segment->add_option("--reference", sg.reference, "reference label (default: the entry's fixed_reference)");
  segment->add_option("--out-mask", sg.out_mask, "predicted label PNG")->required();
  segment->add_option("--out-overlay", sg.out_overlay, "overlay PNG");
  segment->add_option("--window", sg.tiling.window)->capture_default_str();
  segment->add_option("--stride", sg.tiling.stride)->capture_default_str();
  segment->add_option("--patch-size", sg.patch_size)->capture_default_str();
  segment->add_option("--feature-dim", sg.feature_dim)->capture_default_str();
  segment->add_option("--filter-threshold", sg.filter_threshold, "cosine cutoff of the similarity filter")
      ->capture_default_str();
  segment->add_flag("--no-filter", sg.no_filter, "keep every reconstructed instance");
  segment->add_flag("--pad", sg.pad, "reflect-pad images smaller than the window");
  add_recon_flags(segment, sg.recon);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "score predictions against the manifest");
  eval->add_option("--pred-dir", ev.pred_dir, "directory of <id>.png predictions")->required();
  eval->add_option("--manifest", ev.manifest)->required();
  eval->add_option("--thresholds", ev.thresholds, "IoU thresholds")->capture_default_str();
  eval->add_option("--out", ev.out, "metrics JSON path (default: stdout)");
  eval->add_flag("--all-instances", ev.all_instances, "score against every instance, not only the reference type");

  MixArgs mx;
  auto* mix = app.add_subcommand("mix", "paste cells of other types into each image");
  mix->add_option("--manifest", mx.manifest)->required();
  mix->add_option("--out", mx.out_dir, "output directory")->required();
  mix->add_option("--n-paste-min", mx.params.n_paste_min)->capture_default_str();
  mix->add_option("--n-paste-max", mx.params.n_paste_max)->capture_default_str();
  mix->add_option("--max-attempts", mx.params.max_attempts)->capture_default_str();
  mix->add_flag("--allow-overlap", mx.params.allow_overlap);
  mix->add_option("--seed", mx.seed, "RNG seed (falls back to PERCS_SEED)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fixtures) return cmd_fixtures(fx, out, err);
    if (*flows) return cmd_flows(fl, out);
    if (*segment) return cmd_segment(sg, out);
    if (*eval) return cmd_eval(ev, out);
    if (*mix) return cmd_mix(mx, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::invalid_argument& e) {  // config, dimension, malformed input, usage
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ProtocolError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace percs::cli
