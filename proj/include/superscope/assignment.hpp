#pragma once

// Linear assignment by the Hungarian method (shortest augmenting paths with
// dual potentials), O(n^2 m) for an n x m cost matrix.

#include "superscope/core.hpp"

#include <limits>
#include <vector>

namespace superscope {

/// Minimum-cost matching of rows to columns. Returns, for every row, the
/// matched column or -1 when there are more rows than columns.
inline std::vector<int> hungarian_min(const Matrix& cost) {
  if (!cost.allFinite()) fail(ErrorCode::BadFormat, "assignment cost matrix has non-finite entries");
  const bool transposed = cost.rows() > cost.cols();
  const Matrix a = transposed ? Matrix(cost.transpose()) : cost;
  const auto n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  if (n == 0 || m == 0) return std::vector<int>(static_cast<std::size_t>(cost.rows()), -1);

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;

  if (!transposed) return row_to_col;
  std::vector<int> out(static_cast<std::size_t>(cost.rows()), -1);
  for (int r = 0; r < n; ++r)
    if (row_to_col[r] >= 0) out[row_to_col[r]] = r;
  return out;
}

inline std::vector<int> hungarian_max(const Matrix& score) { return hungarian_min(-score); }

}  // namespace superscope
