#pragma once

#include <filesystem>
#include <vector>

#include "tvae/matrix.hpp"

namespace tvae {

/// Writes a binary PGM ("P5", maxval 255) tiling the images left-to-right,
/// top-to-bottom into `cols` columns; unfilled cells stay black. Pixel bytes
/// are round(value * 255) clamped to [0, 255].
void export_pgm_grid(const std::vector<Matrix>& images, std::size_t cols,
                     const std::filesystem::path& path);

}  // namespace tvae
