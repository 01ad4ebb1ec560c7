#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tvae/adam.hpp"
#include "tvae/config.hpp"
#include "tvae/model.hpp"

namespace tvae {

/// Serialized training state. Binary layout (little-endian throughout):
///   magic "TVAE", version u16 = 1,
///   config-blob-length u32, config blob (UTF-8 of the config text),
///   layer-count u16,
///   per layer: rows u32, cols u32, weights (rows*cols f64), biases (cols f64),
///   Adam m then v in the same per-layer order (weights then biases each),
///   t u64, best-val-loss f64, seed u64.
struct Checkpoint {
  TrainConfig config;
  std::vector<DenseLayer> layers;
  AdamState adam;
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tvae
