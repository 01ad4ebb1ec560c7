#pragma once

#include <utility>
#include <vector>

#include "tvae/matrix.hpp"

namespace tvae {

/// Structural-similarity settings: the classic 11x11 Gaussian window with
/// sigma 1.5 and stabilizers k1 = 0.01, k2 = 0.03 on a unit data range.
struct SsimConfig {
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  void validate(std::size_t rows, std::size_t cols) const;
};

/// Mean SSIM over all window positions fully inside the frame (no padding).
/// Images must share a shape at least as large as the window.
double ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg = {});

/// Arithmetic mean of per-pair ssim; the list must be nonempty.
double mean_ssim(const std::vector<std::pair<Matrix, Matrix>>& pairs,
                 const SsimConfig& cfg = {});

/// Copies row `r` of a [N x 784] matrix into a 28x28 image.
Matrix image_from_row(const Matrix& flat, std::size_t r);

}  // namespace tvae
