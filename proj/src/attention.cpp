#include <cmath>

#include "percs/model_head.hpp"

namespace percs {
namespace {

Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Linear& l) {
  Eigen::MatrixXd y = x * l.weight;
  y.rowwise() += l.bias;
  return y;
}

void softmax_rows(Eigen::MatrixXd& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const LayerNorm& norm) {
  constexpr double kEps = 1e-5;
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    y.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + kEps)).matrix();
  }
  y.array().rowwise() *= norm.gamma.array();
  y.rowwise() += norm.beta;
  return y;
}

Eigen::MatrixXd attend(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& context, const AttentionWeights& w,
                       AttentionTrace* trace) {
  const Eigen::MatrixXd q = affine(queries, w.query);
  const Eigen::MatrixXd k = affine(context, w.key);
  const Eigen::MatrixXd v = affine(context, w.value);
  const Eigen::Index width = q.cols();
  if (w.heads < 1 || width % w.heads != 0) throw DimensionError("attention width must divide into heads");
  const Eigen::Index head_dim = width / w.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Eigen::MatrixXd merged(q.rows(), width);
  for (int h = 0; h < w.heads; ++h) {
    const auto cols = Eigen::seqN(h * head_dim, head_dim);
    Eigen::MatrixXd scores = q(Eigen::all, cols) * k(Eigen::all, cols).transpose() * scale;
    softmax_rows(scores);
    merged(Eigen::all, cols) = scores * v(Eigen::all, cols);
    if (trace) trace->weights.push_back(std::move(scores));
  }
  return affine(merged, w.output);
}

Eigen::RowVectorXd reference_token_input(const PatchFeatureMap& features, const ReferenceEmbedding& ref) {
  if (ref.dim() != features.dim()) throw DimensionError("reference and feature dims differ");
  double norm_sum = 0.0;
  for (int t = 0; t < features.tokens(); ++t) {
    double sq = 0.0;
    for (double v : features.token(t)) sq += v * v;
    norm_sum += std::sqrt(sq);
  }
  double scale = norm_sum / features.tokens();
  if (scale == 0.0) scale = 1.0;
  Eigen::RowVectorXd in(features.dim() + 1);
  for (int d = 0; d < features.dim(); ++d) in(d) = ref.vector()[d] * scale;
  in(features.dim()) = 1.0;  // a reference is perfectly similar to itself
  return in;
}

TokenGrid fuse_and_attend(const PatchFeatureMap& features, const RealGrid& similarity, const ReferenceEmbedding& ref,
                          const HeadWeights& w, const FuseOptions& options, AttentionTrace* trace) {
  check_head_weights(w);
  if (features.dim() != w.feature_dim) throw DimensionError("feature dim does not match head weights");
  if (similarity.height() != features.grid_h() || similarity.width() != features.grid_w()) {
    throw DimensionError("similarity grid does not match the feature grid");
  }
  const int n = features.tokens();
  const int d = features.dim();
  Eigen::MatrixXd input(n, d + 1);
  for (int t = 0; t < n; ++t) {
    auto f = features.token(t);
    for (int j = 0; j < d; ++j) input(t, j) = f[j];
    input(t, d) = similarity.values()[t];
  }
  Eigen::MatrixXd x = affine(input, w.proj);

  Eigen::RowVectorXd ref_token;
  if (options.reference_token) ref_token = affine(reference_token_input(features, ref), w.proj);

  for (const auto& layer : w.layers) {
    Eigen::MatrixXd context(x.rows() + (options.reference_token ? 1 : 0), x.cols());
    context.topRows(x.rows()) = x;
    if (options.reference_token) context.bottomRows(1) = ref_token;

    x = layer_norm(x + attend(x, context, layer.attention, trace), layer.norm1);
    Eigen::MatrixXd hidden = affine(x, layer.ff1).unaryExpr([](double v) { return gelu(v); });
    x = layer_norm(x + affine(hidden, layer.ff2), layer.norm2);
  }
  return TokenGrid{features.grid_h(), features.grid_w(), std::move(x)};
}

ChannelStack run_head(const PatchFeatureMap& features, const ReferenceEmbedding& ref, const HeadWeights& w,
                      TokenGrid* tokens_out) {
  const RealGrid sim = cosine_similarity_map(features, ref);
  TokenGrid tokens = fuse_and_attend(features, sim, ref, w);
  ChannelStack out = decode(tokens, w);
  if (tokens_out) *tokens_out = std::move(tokens);
  return out;
}

}  // namespace percs
