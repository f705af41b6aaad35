#include <algorithm>
#include <cmath>
#include <limits>

#include "percs/model_head.hpp"

namespace percs {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

FlowLoss loss_mse(const FlowField& pred, const FlowField& gt, const BinaryMask& foreground) {
  if (!pred.dy.same_shape(gt.dy) || !pred.dy.same_shape(foreground) || !pred.dy.same_shape(pred.dx) ||
      !gt.dy.same_shape(gt.dx)) {
    throw DimensionError("loss_mse: canvas mismatch");
  }
  FlowLoss out{0.0, FlowField(pred.height(), pred.width())};
  const double count = 2.0 * static_cast<double>(count_pixels(foreground));
  if (count == 0.0) return out;
  double sum = 0.0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!foreground(y, x)) continue;
      const double ey = pred.dy(y, x) - gt.dy(y, x);
      const double ex = pred.dx(y, x) - gt.dx(y, x);
      sum += ey * ey + ex * ex;
      out.gradient.dy(y, x) = 2.0 * ey / count;
      out.gradient.dx(y, x) = 2.0 * ex / count;
    }
  }
  out.value = sum / count;
  return out;
}

LogitLoss loss_bce(const LogitMap& logits, const BinaryMask& targets) {
  if (!logits.same_shape(targets)) throw DimensionError("loss_bce: canvas mismatch");
  LogitLoss out{0.0, LogitMap(logits.height(), logits.width(), 0.0)};
  const double count = static_cast<double>(logits.size());
  if (count == 0.0) return out;
  auto z = logits.values();
  auto t = targets.values();
  auto g = out.gradient.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double target = t[i] ? 1.0 : 0.0;
    // max(z, 0) - z t + log(1 + exp(-|z|))
    sum += std::max(z[i], 0.0) - z[i] * target + std::log1p(std::exp(-std::abs(z[i])));
    g[i] = (sigmoid(z[i]) - target) / count;
  }
  out.value = sum / count;
  return out;
}

EmbeddingLoss loss_scl(std::span<const CellEmbedding> cells, const SclConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw ConfigError("loss_scl: temperature must be > 0");
  }
  const std::size_t n = cells.size();
  if (n < 2) throw MalformedInputError("loss_scl: needs at least two cells");
  const std::size_t dim = cells.front().vector.size();
  for (const auto& c : cells) {
    if (c.vector.size() != dim) throw DimensionError("loss_scl: embedding dims differ");
    check_unit(c);
  }

  EmbeddingLoss out{0.0, std::vector<std::vector<double>>(n, std::vector<double>(dim, 0.0))};
  const double inv_t = 1.0 / cfg.temperature;
  std::vector<double> s(n);
  std::vector<double> soft(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t p = 0; p < n; ++p) positives += p != i && cells[p].class_label == cells[i].class_label;
    if (positives == 0) continue;

    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += cells[i].vector[d] * cells[a].vector[d];
      s[a] = dot * inv_t;
      m = std::max(m, s[a]);
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(s[a] - m);
    }
    const double lse = m + std::log(denom);
    double positive_sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && cells[p].class_label == cells[i].class_label) positive_sum += s[p];
    }
    const double inv_pos = 1.0 / static_cast<double>(positives);
    out.value += lse - positive_sum * inv_pos;

    // dL_i/ds_ia = softmax_ia - [a in P(i)] / |P(i)|, and ds_ia = (z_i . dz_a + z_a . dz_i) / tau.
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      soft[a] = std::exp(s[a] - m) / denom;
      const double coeff =
          (soft[a] - (cells[a].class_label == cells[i].class_label ? inv_pos : 0.0)) * inv_t;
      for (std::size_t d = 0; d < dim; ++d) {
        out.gradient[i][d] += coeff * cells[a].vector[d];
        out.gradient[a][d] += coeff * cells[i].vector[d];
      }
    }
  }
  return out;
}

double total_loss(double mse, double bce, double scl) {
  if (!std::isfinite(mse) || !std::isfinite(bce) || !std::isfinite(scl)) {
    throw NumericError("total_loss: non-finite component");
  }
  return mse + bce + scl;
}

std::vector<CellEmbedding> pool_cell_embeddings(const TokenGrid& tokens, const LabelMask& mask,
                                                std::span<const int> class_of) {
  if (tokens.grid_h < 1 || tokens.grid_w < 1 || mask.height() % tokens.grid_h != 0 ||
      mask.width() % tokens.grid_w != 0 || mask.height() / tokens.grid_h != mask.width() / tokens.grid_w) {
    throw DimensionError("pool_cell_embeddings: mask canvas is not a whole multiple of the token grid");
  }
  if (class_of.size() < static_cast<std::size_t>(mask.count()) + 1) {
    throw DimensionError("pool_cell_embeddings: class table does not cover every label");
  }
  const int p = mask.height() / tokens.grid_h;
  const int k = mask.count();
  const Eigen::Index width = tokens.values.cols();
  // coverage(label, token) in pixels
  std::vector<std::vector<std::pair<int, int>>> cover(static_cast<std::size_t>(k) + 1);
  for (int gy = 0; gy < tokens.grid_h; ++gy) {
    for (int gx = 0; gx < tokens.grid_w; ++gx) {
      std::vector<int> counts(static_cast<std::size_t>(k) + 1, 0);
      for (int y = gy * p; y < (gy + 1) * p; ++y) {
        for (int x = gx * p; x < (gx + 1) * p; ++x) ++counts[mask(y, x)];
      }
      for (int l = 1; l <= k; ++l) {
        if (counts[l] > 0) cover[l].push_back({gy * tokens.grid_w + gx, counts[l]});
      }
    }
  }
  const double area = static_cast<double>(p) * p;
  std::vector<CellEmbedding> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int l = 1; l <= k; ++l) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(width);
    for (auto [token, n] : cover[l]) acc += (n / area) * tokens.values.row(token);
    const double norm = acc.norm();
    if (!(norm > 0.0)) throw NumericError("pool_cell_embeddings: zero pooled embedding");
    acc /= norm;
    out.push_back({std::vector<double>(acc.data(), acc.data() + acc.size()), class_of[l]});
  }
  return out;
}

}  // namespace percs
