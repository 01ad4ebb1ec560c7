#include "tvae/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace tvae {

void export_pgm_grid(const std::vector<Matrix>& images, std::size_t cols,
                     const std::filesystem::path& path) {
  if (images.empty()) {
    throw std::invalid_argument("export_pgm_grid: empty image list");
  }
  if (cols == 0) {
    throw std::invalid_argument("export_pgm_grid: cols must be >= 1");
  }
  const std::size_t cell_rows = images.front().rows();
  const std::size_t cell_cols = images.front().cols();
  for (const Matrix& img : images) {
    if (img.rows() != cell_rows || img.cols() != cell_cols) {
      throw std::invalid_argument("export_pgm_grid: mixed image shapes " +
                                  images.front().shape_string() + " vs " +
                                  img.shape_string());
    }
  }
  const std::size_t grid_rows = (images.size() + cols - 1) / cols;
  const std::size_t height = grid_rows * cell_rows;
  const std::size_t width = cols * cell_cols;

  std::vector<unsigned char> canvas(height * width, 0);
  for (std::size_t idx = 0; idx < images.size(); ++idx) {
    const std::size_t cell_r = (idx / cols) * cell_rows;
    const std::size_t cell_c = (idx % cols) * cell_cols;
    const Matrix& img = images[idx];
    for (std::size_t r = 0; r < cell_rows; ++r) {
      for (std::size_t c = 0; c < cell_cols; ++c) {
        long v = std::lround(img(r, c) * 255.0);
        if (v < 0) v = 0;
        if (v > 255) v = 255;
        canvas[(cell_r + r) * width + cell_c + c] = static_cast<unsigned char>(v);
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()),
            static_cast<std::streamsize>(canvas.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace tvae
