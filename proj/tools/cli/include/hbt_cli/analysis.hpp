#pragma once

#include <vector>

namespace hbt::cli {

struct gaussian_fit_result {
  double amplitude = 0.0;
  double width = 0.0;  // rms
  double baseline = 1.0;
  double r_squared = 0.0;                 // free baseline
  double r_squared_fixed_baseline = 0.0;  // baseline pinned to 1
};

// Least-squares fit of B + A exp(-r^2 / 2 w^2). A and B are linear, w is
// found by a log-grid scan refined with golden-section search.
gaussian_fit_result fit_gaussian(const std::vector<double>& r, const std::vector<double>& y);

}  // namespace hbt::cli
