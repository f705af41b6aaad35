#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "json.hpp"

#include "percs/file_util.hpp"
#include "percs/model_head.hpp"

namespace percs {
namespace {

using Json = nlohmann::json;

constexpr std::uint8_t kMagic[4] = {'P', 'C', 'S', 'W'};

// Uniform in [-bound, bound) from the top 53 bits, rounded to f32.
class WeightSampler {
 public:
  explicit WeightSampler(std::uint64_t seed) : engine_(seed) {}
  double next(double bound) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * bound);
  }

 private:
  std::mt19937_64 engine_;
};

Linear make_linear(int in, int out, WeightSampler& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l{Eigen::MatrixXd(in, out), Eigen::RowVectorXd::Zero(out)};
  for (int r = 0; r < in; ++r) {
    for (int c = 0; c < out; ++c) l.weight(r, c) = rng.next(bound);
  }
  return l;
}

LayerNorm make_norm(int width) { return {Eigen::RowVectorXd::Ones(width), Eigen::RowVectorXd::Zero(width)}; }

TransposedConv make_conv(int in, int out, int kernel, WeightSampler& rng) {
  TransposedConv conv{in, out, kernel, kernel, {}, std::vector<double>(static_cast<std::size_t>(out), 0.0)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  conv.weight.resize(static_cast<std::size_t>(in) * out * kernel * kernel);
  for (double& v : conv.weight) v = rng.next(bound);
  return conv;
}

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;  // row-major
};

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  }
  return v;
}

std::vector<double> row_vector(const Eigen::RowVectorXd& m) { return {m.data(), m.data() + m.size()}; }

std::vector<NamedTensor> tensors_of(const HeadWeights& w) {
  std::vector<NamedTensor> t;
  auto linear = [&](const std::string& name, const Linear& l) {
    t.push_back({name + ".weight", {static_cast<int>(l.weight.rows()), static_cast<int>(l.weight.cols())},
                 row_major(l.weight)});
    t.push_back({name + ".bias", {static_cast<int>(l.bias.size())}, row_vector(l.bias)});
  };
  auto norm = [&](const std::string& name, const LayerNorm& n) {
    t.push_back({name + ".gamma", {static_cast<int>(n.gamma.size())}, row_vector(n.gamma)});
    t.push_back({name + ".beta", {static_cast<int>(n.beta.size())}, row_vector(n.beta)});
  };
  auto conv = [&](const std::string& name, const TransposedConv& c) {
    t.push_back({name + ".weight", {c.in_channels, c.out_channels, c.kernel, c.kernel}, c.weight});
    t.push_back({name + ".bias", {c.out_channels}, c.bias});
  };
  linear("proj", w.proj);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i);
    const auto& layer = w.layers[i];
    linear(p + ".attn.query", layer.attention.query);
    linear(p + ".attn.key", layer.attention.key);
    linear(p + ".attn.value", layer.attention.value);
    linear(p + ".attn.output", layer.attention.output);
    norm(p + ".norm1", layer.norm1);
    linear(p + ".ff1", layer.ff1);
    linear(p + ".ff2", layer.ff2);
    norm(p + ".norm2", layer.norm2);
  }
  conv("decoder.up1", w.up1);
  conv("decoder.up2", w.up2);
  return t;
}

// Writes values back in the same traversal order as tensors_of.
void assign_tensors(HeadWeights& w, const std::vector<std::vector<double>>& values) {
  std::size_t next = 0;
  auto matrix = [&](Eigen::MatrixXd& m) {
    const auto& v = values.at(next++);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[static_cast<std::size_t>(r * m.cols() + c)];
    }
  };
  auto vec = [&](Eigen::RowVectorXd& m) {
    const auto& v = values.at(next++);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = v[static_cast<std::size_t>(i)];
  };
  auto linear = [&](Linear& l) {
    matrix(l.weight);
    vec(l.bias);
  };
  auto norm = [&](LayerNorm& n) {
    vec(n.gamma);
    vec(n.beta);
  };
  auto conv = [&](TransposedConv& c) {
    c.weight = values.at(next++);
    c.bias = values.at(next++);
  };
  linear(w.proj);
  for (auto& layer : w.layers) {
    linear(layer.attention.query);
    linear(layer.attention.key);
    linear(layer.attention.value);
    linear(layer.attention.output);
    norm(layer.norm1);
    linear(layer.ff1);
    linear(layer.ff2);
    norm(layer.norm2);
  }
  conv(w.up1);
  conv(w.up2);
}

void check_linear(const Linear& l, Eigen::Index in, Eigen::Index out, const char* what) {
  if (l.weight.rows() != in || l.weight.cols() != out || l.bias.size() != out) {
    throw DimensionError(std::string("head weights: inconsistent shape for ") + what);
  }
}

}  // namespace

void check_head_weights(const HeadWeights& w) {
  const Eigen::Index width = w.proj.weight.cols();
  if (w.feature_dim < 1 || width < 1) throw DimensionError("head weights: empty projection");
  check_linear(w.proj, w.feature_dim + 1, width, "proj");
  for (const auto& layer : w.layers) {
    const auto& a = layer.attention;
    if (a.heads < 1 || width % a.heads != 0) throw DimensionError("head weights: width not divisible by heads");
    check_linear(a.query, width, width, "query");
    check_linear(a.key, width, width, "key");
    check_linear(a.value, width, width, "value");
    check_linear(a.output, width, width, "output");
    const Eigen::Index ff = layer.ff1.weight.cols();
    check_linear(layer.ff1, width, ff, "ff1");
    check_linear(layer.ff2, ff, width, "ff2");
    for (const auto* n : {&layer.norm1, &layer.norm2}) {
      if (n->gamma.size() != width || n->beta.size() != width) throw DimensionError("head weights: layer-norm shape");
    }
  }
  if (w.up1.in_channels != width || w.up2.in_channels != w.up1.out_channels || w.up2.out_channels != 3) {
    throw DimensionError("head weights: decoder channel chain must be width -> c -> 3");
  }
  for (const auto& t : tensors_of(w)) {
    for (double v : t.values) {
      if (!std::isfinite(v)) throw NumericError("head weights: non-finite value in " + t.name);
    }
  }
}

HeadWeights init_head_weights(int feature_dim, std::uint64_t seed, const HeadShape& shape) {
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (shape.width < 1 || shape.heads < 1 || shape.width % shape.heads != 0 || shape.feed_forward < 1 ||
      shape.decoder_channels < 1 || shape.stage1_kernel < 1 || shape.stage2_kernel < 1) {
    throw ConfigError("invalid head shape");
  }
  WeightSampler rng(seed);
  HeadWeights w;
  w.feature_dim = feature_dim;
  w.proj = make_linear(feature_dim + 1, shape.width, rng);
  for (auto& layer : w.layers) {
    layer.attention.heads = shape.heads;
    layer.attention.query = make_linear(shape.width, shape.width, rng);
    layer.attention.key = make_linear(shape.width, shape.width, rng);
    layer.attention.value = make_linear(shape.width, shape.width, rng);
    layer.attention.output = make_linear(shape.width, shape.width, rng);
    layer.norm1 = make_norm(shape.width);
    layer.ff1 = make_linear(shape.width, shape.feed_forward, rng);
    layer.ff2 = make_linear(shape.feed_forward, shape.width, rng);
    layer.norm2 = make_norm(shape.width);
  }
  w.up1 = make_conv(shape.width, shape.decoder_channels, shape.stage1_kernel, rng);
  w.up2 = make_conv(shape.decoder_channels, 3, shape.stage2_kernel, rng);
  return w;
}

std::vector<std::uint8_t> encode_head_weights(const HeadWeights& w) {
  check_head_weights(w);
  const auto tensors = tensors_of(w);
  Json manifest;
  manifest["format"] = "percs-head-weights";
  manifest["version"] = 1;
  manifest["dtype"] = "f32le";
  manifest["config"] = {{"feature_dim", w.feature_dim},
                        {"width", w.width()},
                        {"heads", w.layers[0].attention.heads},
                        {"feed_forward", w.layers[0].ff1.weight.cols()},
                        {"decoder_channels", w.up1.out_channels},
                        {"stage1_kernel", w.up1.kernel},
                        {"stage2_kernel", w.up2.kernel}};
  Json list = Json::array();
  for (const auto& t : tensors) list.push_back({{"name", t.name}, {"shape", t.shape}});
  manifest["tensors"] = list;
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : tensors) {
    for (double v : t.values) put_f32le(out, static_cast<float>(v));
  }
  return out;
}

HeadWeights decode_head_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw IoError("not a PCSW weights file");
  }
  const std::uint32_t len = get_u32le(bytes, 4);
  if (8 + static_cast<std::size_t>(len) > bytes.size()) throw IoError("truncated weights manifest");
  Json manifest;
  try {
    manifest = Json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  } catch (const Json::exception& e) {
    throw IoError(std::string("weights manifest: ") + e.what());
  }
  HeadShape shape;
  int feature_dim = 0;
  try {
    const auto& c = manifest.at("config");
    feature_dim = c.at("feature_dim").get<int>();
    shape.width = c.at("width").get<int>();
    shape.heads = c.at("heads").get<int>();
    shape.feed_forward = c.at("feed_forward").get<int>();
    shape.decoder_channels = c.at("decoder_channels").get<int>();
    shape.stage1_kernel = c.at("stage1_kernel").get<int>();
    shape.stage2_kernel = c.at("stage2_kernel").get<int>();
  } catch (const Json::exception& e) {
    throw IoError(std::string("weights manifest config: ") + e.what());
  }
  HeadWeights w = init_head_weights(feature_dim, 0, shape);
  const auto expected = tensors_of(w);
  const auto& listed = manifest.at("tensors");
  if (listed.size() != expected.size()) throw IoError("weights manifest lists an unexpected tensor count");

  std::size_t offset = 8 + len;
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (listed[i].at("name").get<std::string>() != expected[i].name ||
        listed[i].at("shape").get<std::vector<int>>() != expected[i].shape) {
      throw IoError("weights manifest entry " + std::to_string(i) + " does not match " + expected[i].name);
    }
    std::vector<double> v(expected[i].values.size());
    for (double& x : v) {
      x = get_f32le(bytes, offset);
      offset += 4;
    }
    values.push_back(std::move(v));
  }
  if (offset != bytes.size()) throw IoError("trailing bytes after weights payload");
  assign_tensors(w, values);
  check_head_weights(w);
  return w;
}

void save_head_weights(const std::filesystem::path& path, const HeadWeights& w) {
  write_atomic(path, encode_head_weights(w));
}

HeadWeights load_head_weights(const std::filesystem::path& path) { return decode_head_weights(read_bytes(path)); }

}  // namespace percs
