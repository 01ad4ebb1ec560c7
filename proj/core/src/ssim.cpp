#include "tvae/ssim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tvae {

void SsimConfig::validate(std::size_t rows, std::size_t cols) const {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("SsimConfig: window must be odd and positive");
  }
  if (static_cast<std::size_t>(window) > rows ||
      static_cast<std::size_t>(window) > cols) {
    throw std::invalid_argument("SsimConfig: window " + std::to_string(window) +
                                " exceeds image " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  if (!(k1 > 0.0) || !(k2 > 0.0) || !(data_range > 0.0) || !(gaussian_sigma > 0.0)) {
    throw std::invalid_argument("SsimConfig: k1, k2, sigma, data_range must be > 0");
  }
}

double ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("ssim: shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
  cfg.validate(a.rows(), a.cols());

  const int w = cfg.window;
  std::vector<double> weights(static_cast<std::size_t>(w) * w);
  {
    const int radius = w / 2;
    double total = 0.0;
    for (int r = 0; r < w; ++r) {
      for (int c = 0; c < w; ++c) {
        const double dr = r - radius, dc = c - radius;
        const double g = std::exp(-(dr * dr + dc * dc) /
                                  (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
        weights[r * w + c] = g;
        total += g;
      }
    }
    for (double& x : weights) x /= total;
  }

  const double c1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
  const double c2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);

  const std::size_t out_rows = a.rows() - w + 1;
  const std::size_t out_cols = a.cols() - w + 1;
  double acc = 0.0;
  for (std::size_t top = 0; top < out_rows; ++top) {
    for (std::size_t left = 0; left < out_cols; ++left) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int r = 0; r < w; ++r) {
        for (int c = 0; c < w; ++c) {
          const double wgt = weights[r * w + c];
          mu_a += wgt * a(top + r, left + c);
          mu_b += wgt * b(top + r, left + c);
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int r = 0; r < w; ++r) {
        for (int c = 0; c < w; ++c) {
          const double wgt = weights[r * w + c];
          const double da = a(top + r, left + c) - mu_a;
          const double db = b(top + r, left + c) - mu_b;
          var_a += wgt * da * da;
          var_b += wgt * db * db;
          cov += wgt * da * db;
        }
      }
      const double numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double denominator =
          (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      acc += numerator / denominator;
    }
  }
  return acc / static_cast<double>(out_rows * out_cols);
}

double mean_ssim(const std::vector<std::pair<Matrix, Matrix>>& pairs,
                 const SsimConfig& cfg) {
  if (pairs.empty()) {
    throw std::invalid_argument("mean_ssim: empty pair list");
  }
  double acc = 0.0;
  for (const auto& [a, b] : pairs) acc += ssim(a, b, cfg);
  return acc / static_cast<double>(pairs.size());
}

Matrix image_from_row(const Matrix& flat, std::size_t r) {
  if (flat.cols() != 784) {
    throw std::invalid_argument("image_from_row: expected 784 columns, got " +
                                std::to_string(flat.cols()));
  }
  Matrix img(28, 28);
  const auto row = flat.row(r);
  for (std::size_t i = 0; i < 784; ++i) img[i] = row[i];
  return img;
}

}  // namespace tvae
