// Writes synthetic shape datasets in IDX format so the pipeline can be
// exercised without external data files.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "tvae/dataset.hpp"
#include "tvae/trainer.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic 28x28 shape dataset generator (IDX format)"};
  std::string out_dir;
  std::size_t n_train = 4096, n_test = 512;
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--train", n_train, "training image count");
  app.add_option("--test", n_test, "test image count");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    const tvae::ImageDataset train = tvae::make_synthetic_shapes(n_train, seed);
    const tvae::ImageDataset test = tvae::make_synthetic_shapes(n_test, seed + 1);
    tvae::save_idx_images(train, tvae::train_images_path(out_dir));
    tvae::save_idx_labels(train.labels,
                          std::filesystem::path(out_dir) / "train-labels-idx1-ubyte");
    tvae::save_idx_images(test, tvae::test_images_path(out_dir));
    tvae::save_idx_labels(test.labels,
                          std::filesystem::path(out_dir) / "t10k-labels-idx1-ubyte");
    std::printf("wrote %zu train / %zu test images to %s\n", n_train, n_test,
                out_dir.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
