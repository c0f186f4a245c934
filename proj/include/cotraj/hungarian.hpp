/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Rectangular linear assignment (Kuhn-Munkres with row/column potentials),
// O(n^2 m) for n <= m.

#pragma once

#include <limits>
#include <vector>

namespace cotraj {

// Minimizes total cost over assignments of every row to a distinct column when
// rows <= cols (and the transpose otherwise). Returns, per row, the assigned
// column or -1. `cost` is row-major [rows x cols].
inline std::vector<int> solve_assignment(const std::vector<double>& cost,
                                         std::size_t rows, std::size_t cols) {
  std::vector<int> result(rows, -1);
  if (rows == 0 || cols == 0) return result;
  const bool flip = rows > cols;
  const std::size_t n = flip ? cols : rows, m = flip ? rows : cols;
  auto c = [&](std::size_t i, std::size_t j) {
    return flip ? cost[j * cols + i] : cost[i * cols + j];
  };
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (!p[j]) continue;
    if (flip) {
      result[j - 1] = static_cast<int>(p[j] - 1);
    } else {
      result[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return result;
}

}  // namespace cotraj
