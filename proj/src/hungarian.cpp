#include <algorithm>
#include <cmath>
#include <limits>

#include "percs/eval.hpp"

namespace percs {

// Kuhn-Munkres with row/column potentials on the padded square cost matrix
// cost = -iou (dummy rows/columns cost 0). O(n^3).
std::vector<MatchPair> hungarian_match(const RealGrid& ious) {
  const int n = ious.height();
  const int m = ious.width();
  for (double v : ious.values()) {
    if (!std::isfinite(v) || v < 0.0) throw MalformedInputError("hungarian_match: entries must be finite and >= 0");
  }
  if (n == 0 || m == 0) return {};
  const int size = std::max(n, m);
  auto cost = [&](int i, int j) { return (i < n && j < m) ? -ious(i, j) : 0.0; };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size + 1, 0.0), v(size + 1, 0.0), minv(size + 1);
  std::vector<int> match(size + 1, 0), way(size + 1, 0);  // match[j] = row assigned to column j (1-based)
  std::vector<char> used(size + 1);
  for (int i = 1; i <= size; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= size; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= size; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<MatchPair> pairs;
  for (int j = 1; j <= size; ++j) {
    const int row = match[j] - 1;
    const int col = j - 1;
    if (row < n && col < m && ious(row, col) > 0.0) pairs.push_back({row, col, ious(row, col)});
  }
  std::sort(pairs.begin(), pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.row < b.row; });
  return pairs;
}

double assignment_total(std::span<const MatchPair> pairs) {
  double total = 0.0;
  for (const auto& p : pairs) total += p.iou;
  return total;
}

}  // namespace percs
