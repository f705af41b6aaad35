#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "percs/core.hpp"

namespace percs {

// ---------------------------------------------------------------------------
// Feature providers
// ---------------------------------------------------------------------------

/// Maps an image to a (H/p) x (W/p) grid of D-dimensional patch features.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int patch_size() const = 0;
  virtual int dim() const = 0;
  virtual PatchFeatureMap extract(const Image& image) const = 0;
};

/// Hand-crafted patch statistics standing in for a pretrained backbone.
///
/// Layout: [mean, std, mean |d/dx|, mean |d/dy|] scaled by 1/p, followed by an
/// intensity-weighted histogram over D-4 equal bins of [0,1] (each bin holds
/// the summed intensity of its pixels divided by p^2). The histogram dominates
/// the feature direction, so cells of different brightness classes have
/// near-orthogonal features while the summary statistics still separate flat
/// patches. Truncated to D when D < 5.
PatchFeatureMap toy_featurizer(const Image& image, int patch_size, int dim);

class ToyFeaturizer final : public FeatureProvider {
 public:
  ToyFeaturizer(int patch_size, int dim);
  int patch_size() const override { return patch_size_; }
  int dim() const override { return dim_; }
  PatchFeatureMap extract(const Image& image) const override { return toy_featurizer(image, patch_size_, dim_); }

 private:
  int patch_size_;
  int dim_;
};

/// Patch size implied by a pixel-resolution mask over the feature grid.
int implied_patch_size(const PatchFeatureMap& features, int height, int width);

/// Coverage-weighted mean of patch features under `mask`, normalized to unit length.
ReferenceEmbedding masked_mean_embedding(const PatchFeatureMap& features, const BinaryMask& mask);

/// Cosine between each patch feature and `ref`; zero-norm patches map to 0.
RealGrid cosine_similarity_map(const PatchFeatureMap& features, const ReferenceEmbedding& ref);

// ---------------------------------------------------------------------------
// Head weights
// ---------------------------------------------------------------------------

/// Row-vector affine map y = x * weight + bias.
struct Linear {
  Eigen::MatrixXd weight;  // in x out
  Eigen::RowVectorXd bias;
};

struct LayerNorm {
  Eigen::RowVectorXd gamma;
  Eigen::RowVectorXd beta;
};

struct AttentionWeights {
  int heads = 4;
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct EncoderLayer {
  AttentionWeights attention;
  LayerNorm norm1;
  Linear ff1;
  Linear ff2;
  LayerNorm norm2;
};

/// Transposed convolution; weight is indexed [in][out][ky][kx].
struct TransposedConv {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

struct HeadShape {
  int width = 256;
  int heads = 4;
  int feed_forward = 512;
  int decoder_channels = 64;
  int stage1_kernel = 7;  // kernel == stride per stage; 7 * 2 = 14 = patch size
  int stage2_kernel = 2;
};

struct HeadWeights {
  int feature_dim = 0;
  Linear proj;  // (D + 1) x width
  std::array<EncoderLayer, 2> layers;
  TransposedConv up1;  // width -> decoder_channels
  TransposedConv up2;  // decoder_channels -> 3

  int width() const { return static_cast<int>(proj.weight.cols()); }
  int upsampling() const { return up1.stride * up2.stride; }
};

/// Throws DimensionError on inconsistent shapes and NumericError on non-finite values.
void check_head_weights(const HeadWeights& w);

/// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit layer-norm
/// scales. Values are rounded to f32 so a saved file reloads bit-identically.
HeadWeights init_head_weights(int feature_dim, std::uint64_t seed, const HeadShape& shape = {});

// Weights file: "PCSW", u32 manifest length, JSON manifest {config, tensors:[{name, shape}]},
// then the tensors' little-endian f32 values concatenated in manifest order.
std::vector<std::uint8_t> encode_head_weights(const HeadWeights& w);
HeadWeights decode_head_weights(std::span<const std::uint8_t> bytes);
void save_head_weights(const std::filesystem::path& path, const HeadWeights& w);
HeadWeights load_head_weights(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

/// Image tokens on the patch grid, row-major, one row per token.
struct TokenGrid {
  int grid_h = 0;
  int grid_w = 0;
  Eigen::MatrixXd values;
};

/// Softmax matrices recorded during a forward pass, layer-major then head-major.
struct AttentionTrace {
  std::vector<Eigen::MatrixXd> weights;
};

/// Multi-head scaled dot-product attention: queries from `queries`, keys and
/// values from `context`; scale 1/sqrt(width / heads).
Eigen::MatrixXd attend(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& context, const AttentionWeights& w,
                       AttentionTrace* trace = nullptr);

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const LayerNorm& norm);
double gelu(double x);

struct FuseOptions {
  bool reference_token = true;
};

/// Reference-token input [ref * scale; 1], with scale the mean patch-feature norm.
Eigen::RowVectorXd reference_token_input(const PatchFeatureMap& features, const ReferenceEmbedding& ref);

/// Projects [feature; similarity] per patch, then runs both encoder layers with the
/// projected reference token appended to keys/values only.
TokenGrid fuse_and_attend(const PatchFeatureMap& features, const RealGrid& similarity, const ReferenceEmbedding& ref,
                          const HeadWeights& w, const FuseOptions& options = {}, AttentionTrace* trace = nullptr);

/// Channels x height x width volume stored as (height * width) x channels.
struct FeatureVolume {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd values;
  int channels() const { return static_cast<int>(values.cols()); }
};

FeatureVolume transposed_conv2d(const FeatureVolume& input, const TransposedConv& conv);

/// Two transposed-convolution stages with a GELU between them; returns 3 full-resolution channels.
ChannelStack decode(const TokenGrid& tokens, const HeadWeights& w);

/// Channels 0-1 are (dy, dx) flows, channel 2 the logit map.
std::pair<FlowField, LogitMap> split_head_output(const ChannelStack& channels);

/// Features -> similarity -> attention -> decode, for one tile.
ChannelStack run_head(const PatchFeatureMap& features, const ReferenceEmbedding& ref, const HeadWeights& w,
                      TokenGrid* tokens_out = nullptr);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct FlowLoss {
  double value = 0.0;
  FlowField gradient;
};

struct LogitLoss {
  double value = 0.0;
  LogitMap gradient;
};

struct EmbeddingLoss {
  double value = 0.0;
  std::vector<std::vector<double>> gradient;  // dL/dz_i, unconstrained
};

struct SclConfig {
  double temperature = 0.1;
};

/// Mean over foreground pixels and both channels of (pred - gt)^2.
FlowLoss loss_mse(const FlowField& pred, const FlowField& gt, const BinaryMask& foreground);

/// Mean binary cross-entropy with logits over all pixels.
LogitLoss loss_bce(const LogitMap& logits, const BinaryMask& targets);

/// Supervised contrastive loss over unit embeddings. Anchors without positives contribute 0.
EmbeddingLoss loss_scl(std::span<const CellEmbedding> cells, const SclConfig& cfg = {});

double total_loss(double mse, double bce, double scl);

/// Coverage-weighted mean token per instance, normalized; class_of[label] gives the class.
std::vector<CellEmbedding> pool_cell_embeddings(const TokenGrid& tokens, const LabelMask& mask,
                                                std::span<const int> class_of);

}  // namespace percs
