#include "tvae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "tvae/rng.hpp"

namespace tvae {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& bytes,
                          std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::string hex_magic(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

}  // namespace

ImageDataset load_idx_images(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() < 16) {
    throw std::runtime_error(path.string() + ": truncated IDX header, " +
                             std::to_string(bytes.size()) + " bytes");
  }
  const std::uint32_t magic = read_u32_be(bytes, 0);
  if (magic != kImageMagic) {
    throw std::runtime_error(path.string() + ": bad image magic " +
                             hex_magic(magic) + ", expected " +
                             hex_magic(kImageMagic));
  }
  const std::uint32_t n = read_u32_be(bytes, 4);
  const std::uint32_t rows = read_u32_be(bytes, 8);
  const std::uint32_t cols = read_u32_be(bytes, 12);
  const std::size_t expected = 16 + std::size_t(n) * rows * cols;
  if (bytes.size() != expected) {
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected) + " bytes, found " +
                             std::to_string(bytes.size()));
  }
  ImageDataset ds;
  ds.images = Matrix(n, std::size_t(rows) * cols);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    ds.images[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  }
  return ds;
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() < 8) {
    throw std::runtime_error(path.string() + ": truncated IDX header, " +
                             std::to_string(bytes.size()) + " bytes");
  }
  const std::uint32_t magic = read_u32_be(bytes, 0);
  if (magic != kLabelMagic) {
    throw std::runtime_error(path.string() + ": bad label magic " +
                             hex_magic(magic) + ", expected " +
                             hex_magic(kLabelMagic));
  }
  const std::uint32_t n = read_u32_be(bytes, 4);
  if (bytes.size() != 8 + std::size_t(n)) {
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(8 + std::size_t(n)) +
                             " bytes, found " + std::to_string(bytes.size()));
  }
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.end());
}

void save_idx_images(const ImageDataset& ds, const std::filesystem::path& path) {
  if (ds.images.cols() != 784) {
    throw std::invalid_argument("save_idx_images: expected 784 columns, got " +
                                std::to_string(ds.images.cols()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_u32_be(out, kImageMagic);
  write_u32_be(out, static_cast<std::uint32_t>(ds.images.rows()));
  write_u32_be(out, 28);
  write_u32_be(out, 28);
  std::vector<unsigned char> buf(ds.images.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<unsigned char>(std::lround(ds.images[i] * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_idx_labels(std::span<const std::uint8_t> labels,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_u32_be(out, kLabelMagic);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split: fraction must be in (0,1), got " +
                                std::to_string(fraction));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngState rng(mix_seed(seed, 0x5b1177));
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i + 1));
    std::swap(order[i], order[j]);
  }
  std::size_t n_second = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(n)));
  if (n_second == 0) n_second = 1;
  if (n_second >= n) n_second = n - 1;
  std::vector<std::size_t> first(order.begin(), order.end() - n_second);
  std::vector<std::size_t> second(order.end() - n_second, order.end());
  return {std::move(first), std::move(second)};
}

namespace {

ImageDataset take_rows(const ImageDataset& ds, std::span<const std::size_t> idx) {
  ImageDataset out;
  out.images = Matrix(idx.size(), ds.images.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = ds.images.row(idx[r]);
    auto dst = out.images.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  if (!ds.labels.empty()) {
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(ds.labels[i]);
  }
  return out;
}

}  // namespace

std::pair<ImageDataset, ImageDataset> split_train_val(const ImageDataset& ds,
                                                      double fraction,
                                                      std::uint64_t seed) {
  auto [train_idx, val_idx] = split_indices(ds.count(), fraction, seed);
  return {take_rows(ds, train_idx), take_rows(ds, val_idx)};
}

std::vector<double> column_means(const Matrix& images) {
  std::vector<double> means(images.cols(), 0.0);
  for (std::size_t r = 0; r < images.rows(); ++r) {
    const auto row = images.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) means[c] += row[c];
  }
  for (double& m : means) m /= static_cast<double>(images.rows());
  return means;
}

std::vector<double> masked_column_means(const Matrix& images,
                                        const BoolMatrix& masks) {
  if (masks.rows() != images.rows() || masks.cols() != images.cols()) {
    throw std::invalid_argument("masked_column_means: mask shape mismatch");
  }
  std::vector<double> sums(images.cols(), 0.0);
  std::vector<std::size_t> counts(images.cols(), 0);
  double global_sum = 0.0;
  std::size_t global_count = 0;
  for (std::size_t r = 0; r < images.rows(); ++r) {
    for (std::size_t c = 0; c < images.cols(); ++c) {
      if (masks(r, c)) continue;
      sums[c] += images(r, c);
      counts[c] += 1;
      global_sum += images(r, c);
      global_count += 1;
    }
  }
  const double global_mean =
      global_count > 0 ? global_sum / static_cast<double>(global_count) : 0.0;
  std::vector<double> means(images.cols());
  for (std::size_t c = 0; c < images.cols(); ++c) {
    if (counts[c] == 0) {
      std::fprintf(stderr,
                   "warning: pixel %zu is corrupted in every image, "
                   "falling back to the global mean\n",
                   c);
      means[c] = global_mean;
    } else {
      means[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }
  return means;
}

Matrix mean_impute(const Matrix& batch, const BoolMatrix& masks,
                   std::span<const double> column_means) {
  if (masks.rows() != batch.rows() || masks.cols() != batch.cols()) {
    throw std::invalid_argument("mean_impute: mask shape mismatch");
  }
  if (column_means.size() != batch.cols()) {
    throw std::invalid_argument("mean_impute: column_means has " +
                                std::to_string(column_means.size()) +
                                " entries, batch has " +
                                std::to_string(batch.cols()) + " columns");
  }
  Matrix out = batch;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t c = 0; c < batch.cols(); ++c) {
      if (masks(r, c)) out(r, c) = column_means[c];
    }
  }
  return out;
}

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

ImageDataset make_synthetic_shapes(std::size_t n, std::uint64_t seed) {
  ImageDataset ds;
  ds.images = Matrix(n, 784);
  ds.labels.resize(n);
  RngState rng(mix_seed(seed, 0x5eed5));
  for (std::size_t img = 0; img < n; ++img) {
    const int cls = static_cast<int>(rng.uniform_index(4));
    ds.labels[img] = static_cast<std::uint8_t>(cls);
    const double amp = 0.75 + 0.25 * rng.uniform();
    const double cx = 9.0 + 10.0 * rng.uniform();
    const double cy = 9.0 + 10.0 * rng.uniform();
    auto row = ds.images.row(img);
    switch (cls) {
      case 0: {  // single soft blob
        const double s = 2.5 + 2.5 * rng.uniform();
        for (int r = 0; r < 28; ++r) {
          for (int c = 0; c < 28; ++c) {
            const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            row[r * 28 + c] = clamp01(amp * std::exp(-d2 / (2.0 * s * s)));
          }
        }
        break;
      }
      case 1: {  // two blobs
        const double s = 2.0 + 1.5 * rng.uniform();
        const double cx2 = 9.0 + 10.0 * rng.uniform();
        const double cy2 = 9.0 + 10.0 * rng.uniform();
        for (int r = 0; r < 28; ++r) {
          for (int c = 0; c < 28; ++c) {
            const double d2a = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            const double d2b = (r - cy2) * (r - cy2) + (c - cx2) * (c - cx2);
            const double v = amp * std::max(std::exp(-d2a / (2.0 * s * s)),
                                            std::exp(-d2b / (2.0 * s * s)));
            row[r * 28 + c] = clamp01(v);
          }
        }
        break;
      }
      case 2: {  // ring
        const double radius = 5.0 + 5.0 * rng.uniform();
        const double width = 1.2 + 1.2 * rng.uniform();
        for (int r = 0; r < 28; ++r) {
          for (int c = 0; c < 28; ++c) {
            const double d = std::sqrt((r - cy) * (r - cy) + (c - cx) * (c - cx));
            const double v = amp * std::exp(-(d - radius) * (d - radius) /
                                            (2.0 * width * width));
            row[r * 28 + c] = clamp01(v);
          }
        }
        break;
      }
      default: {  // soft bar with random orientation
        const double angle = 3.14159265358979323846 * rng.uniform();
        const double width = 1.5 + 1.5 * rng.uniform();
        const double length = 6.0 + 5.0 * rng.uniform();
        const double ca = std::cos(angle), sa = std::sin(angle);
        for (int r = 0; r < 28; ++r) {
          for (int c = 0; c < 28; ++c) {
            const double dx = c - cx, dy = r - cy;
            const double across = -sa * dx + ca * dy;
            const double along = ca * dx + sa * dy;
            const double v = amp *
                             std::exp(-across * across / (2.0 * width * width)) *
                             std::exp(-along * along / (2.0 * length * length));
            row[r * 28 + c] = clamp01(v);
          }
        }
        break;
      }
    }
  }
  return ds;
}

}  // namespace tvae
