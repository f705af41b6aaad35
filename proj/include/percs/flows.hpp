#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "percs/core.hpp"

namespace percs {

/// Flow-following settings. Defaults follow common Cellpose practice.
struct ReconstructionParams {
  double step_size = 1.0;
  int n_steps = 200;
  double prob_threshold = 0.5;
  int min_size = 15;
  int merge_radius = 2;
};

void check_params(const ReconstructionParams& params);

/// In-mask pixel nearest to the per-axis median of the mask coordinates.
/// Ties go to the first pixel in row-major order.
Pixel instance_center(const BinaryMask& mask);

struct GtFlows {
  FlowField flow;
  RealGrid heat;
};

/// Diffusion iterations used for one instance: 2 * (longest bounding-box side) + 10.
int diffusion_iterations(int bbox_height, int bbox_width);

/// Simulated heat diffusion from each instance center; flow is the normalized
/// gradient of log(1 + heat), zero on background.
GtFlows compute_gt_flows(const LabelMask& mask);

/// Euler integration of every pixel above the probability cutoff along the
/// (re-normalized) flow, then clustering of the end points.
LabelMask follow_flows(const FlowField& flow, const LogitMap& logits, const ReconstructionParams& params = {});

LabelMask remove_small_instances(const LabelMask& mask, int min_size);

/// Relabels instances 1..K in order of first appearance in row-major scan.
LabelMask relabel_sequential(const Grid<std::int32_t>& labels);

// PCSF flow files: "PCSF", u32 height, u32 width, then row-major f32 (dy, dx) pairs, little-endian.
std::vector<std::uint8_t> encode_flow_file(const FlowField& flow);
FlowField decode_flow_file(std::span<const std::uint8_t> bytes);
void write_flow_file(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow_file(const std::filesystem::path& path);

}  // namespace percs
