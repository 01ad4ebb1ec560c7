#include "tvae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "tvae/pgm.hpp"
#include "tvae/ssim.hpp"

namespace tvae {

namespace {

// Substream tags for deriving independent deterministic rng streams.
constexpr std::uint64_t kInitStream = 0x11a7;
constexpr std::uint64_t kShuffleStream = 0x5f0f;
constexpr std::uint64_t kTrainNoiseStream = 0x701e;
constexpr std::uint64_t kValNoiseStream = 0xa11d;
constexpr std::uint64_t kTrainMaskStream = 0x7a51;
constexpr std::uint64_t kEvalMaskStream = 0x7e57;
constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kSearchStream = 0x5eac;

std::string model_tag(PriorKind prior) {
  return prior == PriorKind::kGaussian ? "vae-g" : "vae-st";
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto s = src.row(idx[r]);
    std::copy(s.begin(), s.end(), out.row(r).begin());
  }
  return out;
}

BoolMatrix gather_rows(const BoolMatrix& src, std::span<const std::size_t> idx) {
  BoolMatrix out(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto s = src.row(idx[r]);
    std::copy(s.begin(), s.end(), out.row(r).begin());
  }
  return out;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LossAccumulator {
  double total = 0.0, recon = 0.0, kl = 0.0;
  std::size_t n = 0;

  void add(const ElboTerms& terms, std::size_t batch) {
    const double w = static_cast<double>(batch);
    total += terms.total * w;
    recon += terms.recon * w;
    kl += terms.kl * w;
    n += batch;
  }
  double mean_total() const { return total / static_cast<double>(n); }
  double mean_recon() const { return recon / static_cast<double>(n); }
  double mean_kl() const { return kl / static_cast<double>(n); }
};

// Forward-only pass over a split, mean loss per datum.
LossAccumulator split_loss(const VaeModel& model, const Matrix& inputs,
                           const Matrix& targets, const BoolMatrix* masks,
                           int batch_size, RngState& noise_rng) {
  LossAccumulator acc;
  const std::size_t n = inputs.rows();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min<std::size_t>(batch_size, n - start);
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    const Matrix x_in = gather_rows(inputs, idx);
    const Matrix x_tgt = gather_rows(targets, idx);
    BoolMatrix mask_rows;
    const BoolMatrix* mask_ptr = nullptr;
    if (masks != nullptr) {
      mask_rows = gather_rows(*masks, idx);
      mask_ptr = &mask_rows;
    }
    ad::Graph graph;
    NoiseSession noise(noise_rng);
    const auto build = model.build_loss(graph, x_in, x_tgt, mask_ptr, noise);
    acc.add(build.elbo.terms(), count);
  }
  return acc;
}

}  // namespace

std::filesystem::path train_images_path(const std::filesystem::path& data_dir) {
  return data_dir / "train-images-idx3-ubyte";
}

std::filesystem::path test_images_path(const std::filesystem::path& data_dir) {
  return data_dir / "t10k-images-idx3-ubyte";
}

BoolMatrix masks_for_images(const IsingConfig& resolved, std::uint64_t seed,
                            std::size_t first_index, std::size_t count) {
  BoolMatrix masks(count, kMaskPixels);
  for (std::size_t i = 0; i < count; ++i) {
    RngState rng(mix_seed(seed, first_index + i));
    const std::vector<std::uint8_t> mask = generate_ising_mask(rng, resolved);
    std::copy(mask.begin(), mask.end(), masks.row(i).begin());
  }
  return masks;
}

TrainResult train_dataset(const ImageDataset& train_file, const TrainConfig& cfg_in,
                          const std::filesystem::path& out_dir) {
  cfg_in.validate();
  TrainConfig cfg = cfg_in;
  if (cfg.masking) {
    cfg.ising = resolve_ising(cfg.ising, cfg.seed);
  }
  const std::size_t n_total = train_file.count();
  if (n_total < 2) throw std::invalid_argument("train: need at least 2 images");
  if (cfg.masking && train_file.images.cols() != kMaskPixels) {
    throw std::invalid_argument("train: masking needs 28x28 images, got " +
                                std::to_string(train_file.images.cols()) +
                                " pixels");
  }

  const auto [train_idx, val_idx] =
      split_indices(n_total, cfg.val_fraction, cfg.seed);
  Matrix train_targets = gather_rows(train_file.images, train_idx);
  Matrix val_targets = gather_rows(train_file.images, val_idx);

  Matrix train_inputs = train_targets;
  Matrix val_inputs = val_targets;
  BoolMatrix train_masks, val_masks;
  if (cfg.masking) {
    const std::uint64_t mask_seed = mix_seed(cfg.seed, kTrainMaskStream);
    BoolMatrix all_masks(n_total, kMaskPixels);
    for (std::size_t i = 0; i < n_total; ++i) {
      RngState rng(mix_seed(mask_seed, i));
      const auto mask = generate_ising_mask(rng, cfg.ising);
      std::copy(mask.begin(), mask.end(), all_masks.row(i).begin());
    }
    train_masks = gather_rows(all_masks, train_idx);
    val_masks = gather_rows(all_masks, val_idx);
    const std::vector<double> means =
        masked_column_means(train_targets, train_masks);
    train_inputs = mean_impute(train_targets, train_masks, means);
    val_inputs = mean_impute(val_targets, val_masks, means);
    // Unknown pixels carry no ground truth; the loss skips them and the
    // target values there are never read, so inputs double as targets.
    train_targets = train_inputs;
    val_targets = val_inputs;
  }

  RngState init_rng(mix_seed(cfg.seed, kInitStream));
  VaeModel model = VaeModel::init(cfg, init_rng, train_file.images.cols());
  std::vector<Matrix*> params = model.parameters();
  AdamState adam = AdamState::like(params);

  RngState shuffle_rng(mix_seed(cfg.seed, kShuffleStream));
  RngState train_noise(mix_seed(cfg.seed, kTrainNoiseStream));

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  bool have_best = false;

  const std::size_t n_train = train_inputs.rows();
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = n_train; i-- > 1;) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }

    LossAccumulator train_acc;
    for (std::size_t start = 0; start < n_train;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(cfg.batch_size, n_train - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Matrix x_in = gather_rows(train_inputs, idx);
      const Matrix x_tgt = gather_rows(train_targets, idx);
      BoolMatrix mask_rows;
      const BoolMatrix* mask_ptr = nullptr;
      if (cfg.masking) {
        mask_rows = gather_rows(train_masks, idx);
        mask_ptr = &mask_rows;
      }

      ad::Graph graph;
      NoiseSession noise(train_noise);
      const auto build = model.build_loss(graph, x_in, x_tgt, mask_ptr, noise);
      const ElboTerms terms = build.elbo.terms();
      if (!std::isfinite(terms.total)) {
        std::fprintf(stderr,
                     "warning: loss diverged at epoch %d, keeping the last "
                     "good checkpoint\n",
                     epoch);
        result.diverged = true;
        break;
      }
      graph.backward(build.elbo.total);

      std::vector<const Matrix*> grads;
      grads.reserve(build.params.size());
      for (const ad::Var& v : build.params) grads.push_back(&v.grad());
      adam_step(params, grads, adam, cfg.lr);
      train_acc.add(terms, count);
    }
    if (result.diverged) break;

    RngState val_noise(mix_seed(cfg.seed, kValNoiseStream));
    const LossAccumulator val_acc =
        split_loss(model, val_inputs, val_targets,
                   cfg.masking ? &val_masks : nullptr, cfg.batch_size, val_noise);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.logs.push_back({epoch, train_acc.mean_total(), val_acc.mean_total(),
                           train_acc.mean_recon(), train_acc.mean_kl(), wall});

    if (val_acc.mean_total() < best_val) {
      best_val = val_acc.mean_total();
      result.best =
          Checkpoint{cfg, model.layers(), adam, best_val, cfg.seed};
      have_best = true;
    }
  }

  if (!have_best) {
    throw std::runtime_error("train: diverged before completing one epoch");
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_train_log_csv(result.logs, out_dir / "train_log.csv");
    save_checkpoint(result.best, out_dir / "checkpoint.tvae");
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out_dir) {
  const ImageDataset train_file = load_idx_images(train_images_path(data_dir));
  return train_dataset(train_file, cfg, out_dir);
}

void write_train_log_csv(const std::vector<EpochLog>& logs,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,recon,kl,wall_seconds\n";
  for (const EpochLog& log : logs) {
    out << log.epoch << ',' << format_g17(log.train_loss) << ','
        << format_g17(log.val_loss) << ',' << format_g17(log.recon) << ','
        << format_g17(log.kl) << ',' << format_g17(log.wall_seconds) << '\n';
  }
}

namespace {

struct EvalData {
  Matrix originals;          // ground truth frames
  Matrix inputs;             // what the encoder sees (imputed when masked)
  BoolMatrix masks;          // empty when not masking
  std::vector<double> means; // training column means (masked runs)
};

// Assembles the evaluation view of a split: for masked checkpoints the
// inputs are corrupted with per-image masks and mean-imputed using the
// training-split statistics, mirroring the training protocol.
EvalData prepare_eval_data(const Checkpoint& ckpt,
                           const std::filesystem::path& data_dir,
                           const std::string& split, std::uint64_t mask_seed) {
  const TrainConfig& cfg = ckpt.config;
  EvalData data;

  std::vector<std::size_t> original_indices;
  if (split == "test") {
    const ImageDataset test_file = load_idx_images(test_images_path(data_dir));
    data.originals = test_file.images;
    original_indices.resize(data.originals.rows());
    for (std::size_t i = 0; i < original_indices.size(); ++i)
      original_indices[i] = i;
  } else if (split == "train" || split == "val") {
    const ImageDataset train_file = load_idx_images(train_images_path(data_dir));
    auto [train_idx, val_idx] =
        split_indices(train_file.count(), cfg.val_fraction, cfg.seed);
    original_indices = split == "train" ? train_idx : val_idx;
    data.originals = gather_rows(train_file.images, original_indices);
  } else {
    throw std::invalid_argument("evaluate: unknown split " + split);
  }

  data.inputs = data.originals;
  if (!cfg.masking) return data;

  const IsingConfig resolved = resolve_ising(cfg.ising, cfg.seed);

  // Training-split imputation statistics.
  const ImageDataset train_file = load_idx_images(train_images_path(data_dir));
  auto [train_idx, val_idx] =
      split_indices(train_file.count(), cfg.val_fraction, cfg.seed);
  (void)val_idx;
  const Matrix train_images = gather_rows(train_file.images, train_idx);
  const std::uint64_t train_mask_seed = mix_seed(cfg.seed, kTrainMaskStream);
  BoolMatrix train_masks(train_idx.size(), kMaskPixels);
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    RngState rng(mix_seed(train_mask_seed, train_idx[i]));
    const auto mask = generate_ising_mask(rng, resolved);
    std::copy(mask.begin(), mask.end(), train_masks.row(i).begin());
  }
  data.means = masked_column_means(train_images, train_masks);

  // Per-image masks for the evaluated split. Train/val reuse the training
  // masks (fixed per image); test images get their own stream.
  data.masks = BoolMatrix(data.originals.rows(), kMaskPixels);
  const std::uint64_t stream = split == "test"
                                   ? mix_seed(mask_seed, kEvalMaskStream)
                                   : train_mask_seed;
  for (std::size_t i = 0; i < data.originals.rows(); ++i) {
    RngState rng(mix_seed(stream, original_indices[i]));
    const auto mask = generate_ising_mask(rng, resolved);
    std::copy(mask.begin(), mask.end(), data.masks.row(i).begin());
  }
  data.inputs = mean_impute(data.originals, data.masks, data.means);
  return data;
}

double mean_ssim_rows(const Matrix& a, const Matrix& b) {
  std::vector<std::pair<Matrix, Matrix>> pairs;
  pairs.reserve(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    pairs.emplace_back(image_from_row(a, r), image_from_row(b, r));
  }
  return mean_ssim(pairs);
}

Matrix reconstruct_all(const VaeModel& model, const Matrix& inputs,
                       RngState& rng, int batch_size) {
  Matrix out(inputs.rows(), inputs.cols());
  for (std::size_t start = 0; start < inputs.rows(); start += batch_size) {
    const std::size_t count =
        std::min<std::size_t>(batch_size, inputs.rows() - start);
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    const Matrix batch = gather_rows(inputs, idx);
    const Matrix recon = model.reconstruct(batch, rng);
    for (std::size_t i = 0; i < count; ++i) {
      const auto src = recon.row(i);
      std::copy(src.begin(), src.end(), out.row(start + i).begin());
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
                    const std::string& split) {
  const TrainConfig& cfg = ckpt.config;
  VaeModel model = VaeModel::from_layers(cfg, ckpt.layers);
  const EvalData data = prepare_eval_data(ckpt, data_dir, split, cfg.seed);
  const std::uint64_t eval_seed = mix_seed(cfg.seed, kEvalStream);

  RngState recon_rng(eval_seed);
  const Matrix recon = reconstruct_all(model, data.inputs, recon_rng, 256);

  EvalReport report;
  report.rows.push_back({model_tag(cfg.prior), split,
                         mean_ssim_rows(recon, data.originals),
                         data.originals.rows(), eval_seed});
  if (cfg.masking) {
    report.rows.push_back({"mean_impute", split,
                           mean_ssim_rows(data.inputs, data.originals),
                           data.originals.rows(), eval_seed});
  }

  RngState elbo_rng(mix_seed(eval_seed, 1));
  const LossAccumulator acc =
      split_loss(model, data.inputs, data.inputs,
                 cfg.masking ? &data.masks : nullptr, 256, elbo_rng);
  report.mean_neg_elbo = acc.mean_total();
  return report;
}

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "model,split,mean_ssim,n_images,seed\n";
  for (const EvalRow& row : report.rows) {
    out << row.model << ',' << row.split << ',' << format_g17(row.mean_ssim)
        << ',' << row.n_images << ',' << row.seed << '\n';
  }
}

void impute(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
            std::uint64_t mask_seed, const std::filesystem::path& out_dir) {
  const TrainConfig& cfg = ckpt.config;
  if (!cfg.masking) {
    throw std::invalid_argument("impute: checkpoint was not trained with masking");
  }
  VaeModel model = VaeModel::from_layers(cfg, ckpt.layers);
  const EvalData data = prepare_eval_data(ckpt, data_dir, "test", mask_seed);

  const std::size_t n = data.originals.rows();
  const std::size_t n_metrics = std::min<std::size_t>(512, n);
  const std::size_t n_grid = std::min<std::size_t>(16, n);

  RngState recon_rng(mix_seed(mix_seed(cfg.seed, mask_seed), kEvalStream));
  const Matrix recon = reconstruct_all(model, data.inputs, recon_rng, 256);

  std::filesystem::create_directories(out_dir);
  std::vector<Matrix> originals, masks, corrupted, imputed, recons;
  for (std::size_t i = 0; i < n_grid; ++i) {
    originals.push_back(image_from_row(data.originals, i));
    Matrix mask_img(28, 28);
    Matrix corrupted_img = originals.back();
    for (std::size_t j = 0; j < kMaskPixels; ++j) {
      if (data.masks(i, j)) {
        mask_img[j] = 1.0;
        corrupted_img[j] = 0.0;
      }
    }
    masks.push_back(std::move(mask_img));
    corrupted.push_back(std::move(corrupted_img));
    imputed.push_back(image_from_row(data.inputs, i));
    recons.push_back(image_from_row(recon, i));
  }
  constexpr std::size_t kGridCols = 8;
  export_pgm_grid(originals, kGridCols, out_dir / "originals.pgm");
  export_pgm_grid(masks, kGridCols, out_dir / "masks.pgm");
  export_pgm_grid(corrupted, kGridCols, out_dir / "corrupted.pgm");
  export_pgm_grid(imputed, kGridCols, out_dir / "mean_imputed.pgm");
  export_pgm_grid(recons, kGridCols, out_dir / "reconstructions.pgm");

  std::vector<std::size_t> metric_idx(n_metrics);
  for (std::size_t i = 0; i < n_metrics; ++i) metric_idx[i] = i;
  const Matrix orig_m = gather_rows(data.originals, metric_idx);
  const Matrix recon_m = gather_rows(recon, metric_idx);
  const Matrix imputed_m = gather_rows(data.inputs, metric_idx);

  EvalReport report;
  report.rows.push_back({model_tag(cfg.prior), "test",
                         mean_ssim_rows(recon_m, orig_m), n_metrics, mask_seed});
  report.rows.push_back({"mean_impute", "test",
                         mean_ssim_rows(imputed_m, orig_m), n_metrics, mask_seed});
  write_metrics_csv(report, out_dir / "metrics.csv");
}

std::vector<SearchTrial> random_search(const TrainConfig& base, int n_trials,
                                       std::uint64_t seed,
                                       const ImageDataset& train_file,
                                       const std::filesystem::path& out_dir) {
  if (n_trials < 1) throw std::invalid_argument("random_search: n_trials must be >= 1");
  RngState rng(mix_seed(seed, kSearchStream));
  const int latent = base.latent_dim();
  const int batch_choices[3] = {64, 128, 256};

  std::vector<SearchTrial> trials;
  trials.reserve(n_trials);
  for (int t = 0; t < n_trials; ++t) {
    TrainConfig cfg = base;
    const double log_hidden =
        std::log(32.0) + rng.uniform() * (std::log(256.0) - std::log(32.0));
    const int hidden = static_cast<int>(std::lround(std::exp(log_hidden)));
    cfg.encoder_layers = {hidden, latent};
    cfg.decoder_layers = {latent, hidden};
    cfg.lr = std::exp(std::log(1e-4) + rng.uniform() * (std::log(1e-2) - std::log(1e-4)));
    cfg.activation = rng.uniform_index(2) == 0 ? ad::Activation::kRelu
                                               : ad::Activation::kTanh;
    cfg.batch_size = batch_choices[rng.uniform_index(3)];
    cfg.seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(t));

    const TrainResult result = train_dataset(train_file, cfg, "");
    trials.push_back({t, cfg, result.best.best_val_loss});
  }
  std::stable_sort(trials.begin(), trials.end(),
                   [](const SearchTrial& a, const SearchTrial& b) {
                     return a.best_val_loss < b.best_val_loss;
                   });
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "trials.csv");
    if (!out) throw std::runtime_error("cannot write trials.csv");
    out << "trial,hidden,latent,lr,activation,batch_size,seed,best_val_loss\n";
    for (const SearchTrial& trial : trials) {
      out << trial.trial << ',' << trial.cfg.encoder_layers.front() << ','
          << latent << ',' << format_g17(trial.cfg.lr) << ','
          << ad::to_string(trial.cfg.activation) << ',' << trial.cfg.batch_size
          << ',' << trial.cfg.seed << ',' << format_g17(trial.best_val_loss)
          << '\n';
    }
  }
  return trials;
}

}  // namespace tvae
