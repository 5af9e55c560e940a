// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations, written independently of the
// library and used to freeze expected values.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>;  // grid[i][a]: image i, attribute a

/// Target-column mean minus the mean over every other cell, by plain loops
/// in extended precision.
inline double attribute_concept(const Grid& grid, std::size_t target) {
  const std::size_t n = grid.size();
  const std::size_t k = grid.front().size();
  long double on = 0.0L;
  long double off = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j == target) {
        on += grid[i][j];
      } else {
        off += grid[i][j];
      }
    }
  }
  return static_cast<double>(on / static_cast<long double>(n) -
                             off / static_cast<long double>(n * (k - 1)));
}

/// Textbook Pearson: (n sxy - sx sy) / sqrt((n sxx - sx^2)(n syy - sy^2)).
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) /
                             std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

}  // namespace oracle
