#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "tvae/matrix.hpp"

namespace tvae {

/// Normalized image set: pixels in [0,1], one image per row (28x28 -> 784
/// columns). Labels and per-pixel means are optional (empty when absent).
struct ImageDataset {
  Matrix images;
  std::vector<std::uint8_t> labels;
  std::vector<double> column_means;

  std::size_t count() const { return images.rows(); }
};

/// Reads an IDX image file (big-endian magic 0x00000803, dims [N, 28, 28],
/// unsigned bytes) and normalizes pixels by 255. Throws on a wrong magic
/// (reporting the observed value) or a truncated file.
ImageDataset load_idx_images(const std::filesystem::path& path);

/// Reads an IDX label file (magic 0x00000801).
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

/// Inverse of load_idx_images; load(save(ds)) reproduces bytes exactly.
void save_idx_images(const ImageDataset& ds, const std::filesystem::path& path);
void save_idx_labels(std::span<const std::uint8_t> labels,
                     const std::filesystem::path& path);

/// Deterministic seeded shuffle, then split: the second element holds
/// round(fraction * n) rows, the first the rest.
std::pair<ImageDataset, ImageDataset> split_train_val(const ImageDataset& ds,
                                                      double fraction,
                                                      std::uint64_t seed);

/// The shuffled index sets behind split_train_val, for callers that must
/// keep per-image side data (masks) aligned with the split.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double fraction, std::uint64_t seed);

/// Per-pixel means over uncorrupted entries only. A pixel that is corrupted
/// in every image falls back to the global mean and emits a warning on
/// stderr.
std::vector<double> masked_column_means(const Matrix& images,
                                        const BoolMatrix& masks);

/// Plain per-pixel means (no masking).
std::vector<double> column_means(const Matrix& images);

/// Replaces corrupted entries by their column mean; uncorrupted entries pass
/// through unchanged.
Matrix mean_impute(const Matrix& batch, const BoolMatrix& masks,
                   std::span<const double> column_means);

/// Deterministic synthetic 28x28 shape images (blobs, rings, soft bars) used
/// for desk-scale experiments and fixtures when no external dataset is
/// available. Labels hold the shape class.
ImageDataset make_synthetic_shapes(std::size_t n, std::uint64_t seed);

}  // namespace tvae
