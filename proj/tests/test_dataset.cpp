#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tvae/dataset.hpp"
#include "tvae/pgm.hpp"

using namespace tvae;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("IDX image loader parses a handcrafted two-image file") {
  const auto path = temp_path("tvae_test_idx_two.idx");
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 2,
                                      0, 0, 0, 28, 0, 0, 0, 28};
    out.write(reinterpret_cast<const char*>(header), 16);
    std::vector<unsigned char> pixels(2 * 784, 0);
    pixels[0] = 37;              // image 0, pixel (0,0)
    pixels[784] = 255;           // image 1, pixel (0,0)
    pixels[2 * 784 - 1] = 128;   // image 1, last pixel
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
  }
  const ImageDataset ds = load_idx_images(path);
  CHECK(ds.count() == 2);
  CHECK(ds.images(0, 0) == 37.0 / 255.0);
  CHECK(ds.images(1, 0) == 1.0);  // byte 255 -> exactly 1.0
  CHECK(ds.images(1, 783) == 128.0 / 255.0);
  std::filesystem::remove(path);
}

TEST_CASE("IDX loader rejects a label magic and truncated files") {
  const auto path = temp_path("tvae_test_idx_bad.idx");
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char header[16] = {0, 0, 8, 1, 0, 0, 0, 2,
                                      0, 0, 0, 28, 0, 0, 0, 28};
    out.write(reinterpret_cast<const char*>(header), 16);
  }
  CHECK_THROWS_WITH_AS(load_idx_images(path), doctest::Contains("0x00000801"),
                       std::runtime_error);

  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 2,
                                      0, 0, 0, 28, 0, 0, 0, 28};
    out.write(reinterpret_cast<const char*>(header), 16);
    const unsigned char byte = 9;
    out.write(reinterpret_cast<const char*>(&byte), 1);  // far too short
  }
  CHECK_THROWS_AS(load_idx_images(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("IDX round-trip reproduces bytes exactly") {
  const ImageDataset ds = make_synthetic_shapes(32, 5);
  const auto p1 = temp_path("tvae_test_roundtrip1.idx");
  const auto p2 = temp_path("tvae_test_roundtrip2.idx");
  save_idx_images(ds, p1);
  const ImageDataset loaded = load_idx_images(p1);
  save_idx_images(loaded, p2);
  CHECK(file_bytes(p1) == file_bytes(p2));

  const auto lp1 = temp_path("tvae_test_labels1.idx");
  save_idx_labels(ds.labels, lp1);
  CHECK(load_idx_labels(lp1) == ds.labels);

  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  std::filesystem::remove(lp1);
}

TEST_CASE("split_train_val is a deterministic partition") {
  const ImageDataset ds = make_synthetic_shapes(100, 9);
  const auto [train, val] = split_train_val(ds, 0.2, 42);
  CHECK(train.count() == 80);
  CHECK(val.count() == 20);

  const auto [idx_a, idx_b] = split_indices(100, 0.2, 42);
  const auto [idx_a2, idx_b2] = split_indices(100, 0.2, 42);
  CHECK(idx_a == idx_a2);
  CHECK(idx_b == idx_b2);

  std::vector<char> seen(100, 0);
  for (std::size_t i : idx_a) seen[i] += 1;
  for (std::size_t i : idx_b) seen[i] += 1;
  for (char c : seen) CHECK(c == 1);  // union is everything, no overlap

  CHECK_THROWS_AS(split_indices(100, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_indices(100, 1.0, 1), std::invalid_argument);
}

TEST_CASE("mean imputation") {
  // 3x2 toy matrix with a hand-picked mask: column 0 has known values
  // {0.2, 0.6} -> mean 0.4 fills the masked row.
  Matrix batch(3, 2, {0.2, 0.1, 0.6, 0.3, 0.9, 0.5});
  BoolMatrix masks(3, 2);
  masks(2, 0) = 1;
  const auto means = masked_column_means(batch, masks);
  CHECK(means[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(means[1] == doctest::Approx((0.1 + 0.3 + 0.5) / 3.0).epsilon(1e-15));

  const Matrix imputed = mean_impute(batch, masks, means);
  CHECK(imputed(2, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(imputed(0, 0) == 0.2);
  CHECK(imputed(2, 1) == 0.5);

  // all-false mask: output equals input
  BoolMatrix none(3, 2);
  const Matrix same = mean_impute(batch, none, masked_column_means(batch, none));
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(same[i] == batch[i]);
}

TEST_CASE("fully corrupted pixel falls back to the global mean") {
  Matrix batch(2, 2, {0.2, 0.4, 0.6, 0.8});
  BoolMatrix masks(2, 2);
  masks(0, 0) = 1;
  masks(1, 0) = 1;  // column 0 never observed
  const auto means = masked_column_means(batch, masks);
  CHECK(means[0] == doctest::Approx((0.4 + 0.8) / 2.0).epsilon(1e-15));
}

TEST_CASE("synthetic shapes are deterministic and in range") {
  const ImageDataset a = make_synthetic_shapes(16, 123);
  const ImageDataset b = make_synthetic_shapes(16, 123);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] == b.images[i]);
    CHECK(a.images[i] >= 0.0);
    CHECK(a.images[i] <= 1.0);
  }
  CHECK(a.labels == b.labels);
}

TEST_CASE("PGM grid export and round-trip") {
  const ImageDataset ds = make_synthetic_shapes(3, 77);
  std::vector<Matrix> images;
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix img(28, 28);
    const auto row = ds.images.row(i);
    for (std::size_t j = 0; j < 784; ++j) img[j] = row[j];
    images.push_back(std::move(img));
  }

  const auto path = temp_path("tvae_test_grid.pgm");
  export_pgm_grid(images, 2, path);

  const auto bytes = file_bytes(path);
  // header: P5, 56 x 56, maxval 255
  const std::string header(bytes.begin(), bytes.begin() + 13);
  CHECK(header == "P5\n56 56\n255\n");
  REQUIRE(bytes.size() == 13 + 56 * 56);

  // pixel (0,0) of the first cell
  const long expected = std::lround(images[0](0, 0) * 255.0);
  CHECK(bytes[13] == static_cast<unsigned char>(expected));

  // parse the payload back and compare against the inputs to 1/255
  for (int cell = 0; cell < 3; ++cell) {
    const int cr = (cell / 2) * 28, cc = (cell % 2) * 28;
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        const double recovered =
            bytes[13 + (cr + r) * 56 + cc + c] / 255.0;
        CHECK(std::fabs(recovered - images[cell](r, c)) <= 0.5 / 255.0 + 1e-12);
      }
    }
  }
  // the fourth cell stays black
  CHECK(bytes[13 + 28 * 56 + 28 + 5] == 0);
  std::filesystem::remove(path);
}

TEST_CASE("single-image PGM export") {
  Matrix img(28, 28);
  img(0, 0) = 0.6;
  export_pgm_grid({img}, 1, temp_path("tvae_test_single.pgm"));
  const auto bytes = file_bytes(temp_path("tvae_test_single.pgm"));
  const std::string header(bytes.begin(), bytes.begin() + 13);
  CHECK(header == "P5\n28 28\n255\n");
  CHECK(bytes[13] == static_cast<unsigned char>(std::lround(0.6 * 255.0)));
  std::filesystem::remove(temp_path("tvae_test_single.pgm"));
}
