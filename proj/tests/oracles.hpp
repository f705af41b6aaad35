// Straight-line reference implementations used to check the library.
// They favour obviousness over speed and share no code with src/.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "percs/baseline_filter.hpp"
#include "percs/core.hpp"
#include "percs/model_head.hpp"

namespace oracle {

using percs::BinaryMask;
using percs::RealGrid;

// --- assignment ------------------------------------------------------------

/// Maximum summed IoU over all one-to-one assignments, by enumerating every permutation
/// of the padded square matrix.
inline double max_assignment(const RealGrid& m) {
  const int n = std::max(m.height(), m.width());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double total = 0.0;
    for (int r = 0; r < m.height(); ++r) {
      if (perm[r] < m.width()) total += m(r, perm[r]);
    }
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// --- losses ------------------------------------------------------------------

/// Supervised contrastive loss evaluated term by term without any stabilization.
inline double scl(const std::vector<std::vector<double>>& z, const std::vector<int>& y, double tau) {
  const std::size_t n = z.size();
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < z[a].size(); ++d) s += z[a][d] * z[b][d];
    return s;
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && y[p] == y[i]) pos.push_back(p);
    }
    if (pos.empty()) continue;
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(dot(i, a) / tau);
    }
    double inner = 0.0;
    for (std::size_t p : pos) inner += std::log(std::exp(dot(i, p) / tau) / denom);
    loss += -inner / static_cast<double>(pos.size());
  }
  return loss;
}

/// Central difference of f along direction `dir` at step eps.
inline double directional_fd(const std::function<double(double)>& f, double eps) {
  return (f(eps) - f(-eps)) / (2.0 * eps);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

// --- attention forward pass ---------------------------------------------------

using Rows = std::vector<std::vector<double>>;

inline Rows linear(const Rows& x, const percs::Linear& l) {
  Rows y(x.size(), std::vector<double>(static_cast<std::size_t>(l.weight.cols()), 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (int o = 0; o < l.weight.cols(); ++o) {
      double s = l.bias(o);
      for (int i = 0; i < l.weight.rows(); ++i) s += x[r][i] * l.weight(i, o);
      y[r][o] = s;
    }
  }
  return y;
}

inline Rows norm(const Rows& x, const percs::LayerNorm& ln) {
  Rows y = x;
  for (auto& row : y) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * ln.gamma(j) + ln.beta(j);
  }
  return y;
}

inline Rows attention(const Rows& queries, const Rows& context, const percs::AttentionWeights& w) {
  const Rows q = linear(queries, w.query);
  const Rows k = linear(context, w.key);
  const Rows v = linear(context, w.value);
  const std::size_t width = q[0].size();
  const std::size_t hd = width / static_cast<std::size_t>(w.heads);
  Rows merged(q.size(), std::vector<double>(width, 0.0));
  for (int h = 0; h < w.heads; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> s(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < hd; ++d) dot += q[i][h * hd + d] * k[j][h * hd + d];
        s[j] = std::exp(dot / std::sqrt(static_cast<double>(hd)));
      }
      double total = 0.0;
      for (double e : s) total += e;
      for (std::size_t j = 0; j < k.size(); ++j) {
        for (std::size_t d = 0; d < hd; ++d) merged[i][h * hd + d] += s[j] / total * v[j][h * hd + d];
      }
    }
  }
  return linear(merged, w.output);
}

/// Whole fuse_and_attend forward pass; the reference row is appended as an extra
/// key/value when `ref_input` is non-empty.
inline Rows forward(const Rows& tokens_in, const std::vector<double>& ref_input, const percs::HeadWeights& w) {
  Rows x = linear(tokens_in, w.proj);
  Rows ref;
  if (!ref_input.empty()) ref = linear(Rows{ref_input}, w.proj);
  for (const auto& layer : w.layers) {
    Rows context = x;
    if (!ref.empty()) context.push_back(ref[0]);
    Rows a = attention(x, context, layer.attention);
    for (std::size_t r = 0; r < x.size(); ++r) {
      for (std::size_t j = 0; j < x[r].size(); ++j) a[r][j] += x[r][j];
    }
    x = norm(a, layer.norm1);
    Rows hidden = linear(x, layer.ff1);
    for (auto& row : hidden) {
      for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
    Rows f = linear(hidden, layer.ff2);
    for (std::size_t r = 0; r < x.size(); ++r) {
      for (std::size_t j = 0; j < x[r].size(); ++j) f[r][j] += x[r][j];
    }
    x = norm(f, layer.norm2);
  }
  return x;
}

// --- flows -------------------------------------------------------------------

/// Center and diffusion simulation for a single instance on the full canvas.
struct Diffusion {
  percs::Pixel center;
  RealGrid heat;
  RealGrid dy;
  RealGrid dx;
};

inline Diffusion diffuse(const BinaryMask& m) {
  const int h = m.height();
  const int w = m.width();
  std::vector<int> ys, xs;
  int y0 = h, y1 = -1, x0 = w, x1 = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m(y, x)) continue;
      ys.push_back(y);
      xs.push_back(x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? double(v[n / 2]) : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double my = median(ys);
  const double mx = median(xs);
  Diffusion out{{-1, -1}, RealGrid(h, w, 0.0), RealGrid(h, w, 0.0), RealGrid(h, w, 0.0)};
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = (y - my) * (y - my) + (x - mx) * (x - mx);
      if (m(y, x) && d < best) {
        best = d;
        out.center = {y, x};
      }
    }
  }
  auto in = [&](int y, int x) { return y >= 0 && y < h && x >= 0 && x < w && m(y, x); };
  const int iters = 2 * std::max(y1 - y0 + 1, x1 - x0 + 1) + 10;
  RealGrid& u = out.heat;
  for (int it = 0; it < iters; ++it) {
    u(out.center.y, out.center.x) += 1.0;
    RealGrid next = u;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!m(y, x)) continue;
        double s = u(y, x);
        const int ny[] = {y - 1, y + 1, y, y};
        const int nx[] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (in(ny[k], nx[k])) s += u(ny[k], nx[k]);
        }
        next(y, x) = s / 5.0;
      }
    }
    u = next;
  }
  auto L = [&](int y, int x) { return std::log(1.0 + u(y, x)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m(y, x)) continue;
      double g[2];
      const int sy[] = {1, 0};
      const int sx[] = {0, 1};
      for (int a = 0; a < 2; ++a) {
        const bool b = in(y - sy[a], x - sx[a]);
        const bool f = in(y + sy[a], x + sx[a]);
        if (b && f) {
          g[a] = (L(y + sy[a], x + sx[a]) - L(y - sy[a], x - sx[a])) / 2.0;
        } else if (f) {
          g[a] = L(y + sy[a], x + sx[a]) - L(y, x);
        } else if (b) {
          g[a] = L(y, x) - L(y - sy[a], x - sx[a]);
        } else {
          g[a] = 0.0;
        }
      }
      const double n = std::sqrt(g[0] * g[0] + g[1] * g[1]);
      if (n > 1e-12) {
        out.dy(y, x) = g[0] / n;
        out.dx(y, x) = g[1] / n;
      }
    }
  }
  return out;
}

// --- baseline procedures ---------------------------------------------------

/// Greedy selection by full rescans: each round takes the first row-major pixel
/// holding the largest score among those far enough from the chosen points.
inline std::vector<percs::CandidatePoint> greedy_points(const RealGrid& sim, int k, double min_dist) {
  std::vector<percs::CandidatePoint> chosen;
  std::vector<char> used(sim.size(), 0);
  while (static_cast<int>(chosen.size()) < k) {
    int by = -1, bx = -1;
    for (int y = 0; y < sim.height(); ++y) {
      for (int x = 0; x < sim.width(); ++x) {
        if (used[static_cast<std::size_t>(y) * sim.width() + x]) continue;
        bool far = true;
        for (const auto& c : chosen) far = far && std::hypot(c.row - y, c.col - x) >= min_dist;
        if (!far) continue;
        if (by < 0 || sim(y, x) > sim(by, bx)) {
          by = y;
          bx = x;
        }
      }
    }
    if (by < 0) break;
    used[static_cast<std::size_t>(by) * sim.width() + bx] = 1;
    chosen.push_back({by, bx, sim(by, bx)});
  }
  return chosen;
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a.values()[i] && b.values()[i];
    uni += a.values()[i] || b.values()[i];
  }
  return uni ? double(inter) / uni : 0.0;
}

/// Indices kept by greedy NMS: repeatedly keep the best remaining (earliest on ties)
/// and discard everything overlapping it by more than the threshold.
inline std::vector<std::size_t> nms_indices(const percs::InstanceSet& s, double thresh) {
  std::vector<char> alive(s.size(), 1);
  std::vector<std::size_t> kept;
  while (true) {
    std::size_t best = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (alive[i] && (best == s.size() || s.scores[i] > s.scores[best])) best = i;
    }
    if (best == s.size()) break;
    kept.push_back(best);
    alive[best] = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (alive[i] && mask_iou(s.masks[i], s.masks[best]) > thresh) alive[i] = 0;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace oracle
