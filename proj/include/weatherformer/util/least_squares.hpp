#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wf::util {

struct LeastSquaresFit {
  std::vector<double> coefficients;
  /// True when the design was rank deficient and the ridge system was solved.
  bool used_ridge = false;
};

/// Minimises |X b - y|^2 for a row-major rows x cols design. A rank-deficient
/// design falls back to (X'X + ridge I) b = X'y.
LeastSquaresFit least_squares(std::span<const double> design, std::size_t rows, std::size_t cols,
                              std::span<const double> target, double ridge = 1e-6);

}  // namespace wf::util
