#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tvae/checkpoint.hpp"
#include "tvae/config.hpp"
#include "tvae/dataset.hpp"
#include "tvae/model.hpp"

namespace tvae {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double recon = 0.0;  // train reconstruction part
  double kl = 0.0;     // train KL part
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> logs;
  bool diverged = false;
};

/// Expected file names inside a data directory (the MNIST distribution
/// layout).
std::filesystem::path train_images_path(const std::filesystem::path& data_dir);
std::filesystem::path test_images_path(const std::filesystem::path& data_dir);

/// Full training protocol on an already-loaded training file: seeded
/// train/val split, optional Ising corruption with mean imputation and a
/// masked reconstruction loss, Adam updates, per-epoch validation, and
/// best-validation model selection. Writes train_log.csv and
/// checkpoint.tvae into out_dir unless it is empty.
TrainResult train_dataset(const ImageDataset& train_file, const TrainConfig& cfg,
                          const std::filesystem::path& out_dir);

/// Loads train-images-idx3-ubyte from data_dir and runs train_dataset.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir);

void write_train_log_csv(const std::vector<EpochLog>& logs,
                         const std::filesystem::path& path);

struct EvalRow {
  std::string model;
  std::string split;
  double mean_ssim = 0.0;
  std::size_t n_images = 0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_neg_elbo = 0.0;
};

/// Reconstructs every image of the chosen split (one latent draw per image,
/// eval seed derived from the checkpoint seed) and reports mean SSIM against
/// the originals plus the mean negative ELBO. For checkpoints trained with
/// masking, inputs are corrupted + mean-imputed first and a `mean_impute`
/// baseline row is added.
EvalReport evaluate(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
                    const std::string& split);

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path);

/// Exports the five comparison grids (originals, masks, corrupted,
/// mean-imputed, reconstructions) plus metrics.csv into out_dir. Requires a
/// checkpoint trained with masking; masks are derived from mask_seed.
void impute(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
            std::uint64_t mask_seed, const std::filesystem::path& out_dir);

struct SearchTrial {
  int trial = 0;
  TrainConfig cfg;
  double best_val_loss = 0.0;
};

/// Seeded random hyperparameter search: hidden width (log-uniform 32..256),
/// lr (log-uniform 1e-4..1e-2), activation {relu, tanh}, batch size
/// {64, 128, 256}. Trains each trial and returns the list sorted by best
/// validation loss; writes trials.csv into out_dir unless empty.
std::vector<SearchTrial> random_search(const TrainConfig& base, int n_trials,
                                       std::uint64_t seed,
                                       const ImageDataset& train_file,
                                       const std::filesystem::path& out_dir);

/// Per-image corruption mask, deterministic in (seed, image index).
BoolMatrix masks_for_images(const IsingConfig& resolved, std::uint64_t seed,
                            std::size_t first_index, std::size_t count);

}  // namespace tvae
