#include "percs/model_head.hpp"

namespace percs {

FeatureVolume transposed_conv2d(const FeatureVolume& input, const TransposedConv& conv) {
  if (input.channels() != conv.in_channels) throw DimensionError("transposed_conv2d: input channel mismatch");
  if (conv.kernel < 1 || conv.stride < 1) throw DimensionError("transposed_conv2d: kernel and stride must be >= 1");
  const int k = conv.kernel;
  const std::size_t taps = static_cast<std::size_t>(k) * k;
  if (conv.weight.size() != static_cast<std::size_t>(conv.in_channels) * conv.out_channels * taps ||
      conv.bias.size() != static_cast<std::size_t>(conv.out_channels)) {
    throw DimensionError("transposed_conv2d: weight shape mismatch");
  }
  const int oh = (input.height - 1) * conv.stride + k;
  const int ow = (input.width - 1) * conv.stride + k;

  // kernel(c, tap * out + o) = weight[c][o][ky][kx]
  Eigen::MatrixXd kernel(conv.in_channels, static_cast<Eigen::Index>(taps) * conv.out_channels);
  for (int c = 0; c < conv.in_channels; ++c) {
    for (int o = 0; o < conv.out_channels; ++o) {
      for (std::size_t t = 0; t < taps; ++t) {
        kernel(c, static_cast<Eigen::Index>(t) * conv.out_channels + o) =
            conv.weight[(static_cast<std::size_t>(c) * conv.out_channels + o) * taps + t];
      }
    }
  }
  const Eigen::MatrixXd contrib = input.values * kernel;  // (h*w) x (taps*out)

  FeatureVolume out{oh, ow, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(oh) * ow, conv.out_channels)};
  for (int y = 0; y < input.height; ++y) {
    for (int x = 0; x < input.width; ++x) {
      const Eigen::Index src = static_cast<Eigen::Index>(y) * input.width + x;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const Eigen::Index dst = static_cast<Eigen::Index>(y * conv.stride + ky) * ow + (x * conv.stride + kx);
          const Eigen::Index t = static_cast<Eigen::Index>(ky) * k + kx;
          out.values.row(dst) += contrib.block(src, t * conv.out_channels, 1, conv.out_channels);
        }
      }
    }
  }
  for (int o = 0; o < conv.out_channels; ++o) out.values.col(o).array() += conv.bias[o];
  return out;
}

ChannelStack decode(const TokenGrid& tokens, const HeadWeights& w) {
  if (tokens.values.rows() != static_cast<Eigen::Index>(tokens.grid_h) * tokens.grid_w) {
    throw DimensionError("decode: token count does not match the grid");
  }
  if (w.up2.out_channels != 3) throw DimensionError("decode: final stage must produce 3 channels");
  FeatureVolume stage = transposed_conv2d(FeatureVolume{tokens.grid_h, tokens.grid_w, tokens.values}, w.up1);
  stage.values = stage.values.unaryExpr([](double v) { return gelu(v); });
  const FeatureVolume full = transposed_conv2d(stage, w.up2);

  ChannelStack out(3, RealGrid(full.height, full.width, 0.0));
  for (int c = 0; c < 3; ++c) {
    auto dst = out[c].values();
    for (Eigen::Index i = 0; i < full.values.rows(); ++i) dst[i] = full.values(i, c);
  }
  return out;
}

std::pair<FlowField, LogitMap> split_head_output(const ChannelStack& channels) {
  if (channels.size() != 3) throw DimensionError("head output must have 3 channels");
  FlowField flow;
  flow.dy = channels[0];
  flow.dx = channels[1];
  return {std::move(flow), channels[2]};
}

}  // namespace percs
