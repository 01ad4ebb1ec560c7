// Command-line front end: training, evaluation, imputation, prior sampling,
// mask generation, and random hyperparameter search.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "tvae/checkpoint.hpp"
#include "tvae/config.hpp"
#include "tvae/dataset.hpp"
#include "tvae/distributions.hpp"
#include "tvae/ising.hpp"
#include "tvae/model.hpp"
#include "tvae/pgm.hpp"
#include "tvae/ssim.hpp"
#include "tvae/trainer.hpp"

namespace {

void print_report(const tvae::EvalReport& report) {
  std::printf("model,split,mean_ssim,n_images,seed\n");
  for (const tvae::EvalRow& row : report.rows) {
    std::printf("%s,%s,%.6f,%zu,%llu\n", row.model.c_str(), row.split.c_str(),
                row.mean_ssim, row.n_images,
                static_cast<unsigned long long>(row.seed));
  }
  std::printf("# mean negative ELBO: %.6f\n", report.mean_neg_elbo);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational auto-encoder with Gaussian or Student-t prior"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_data, train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train_config, "config file")->required();
  train_cmd->add_option("--data-dir", train_data, "directory with IDX files")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();

  // eval
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data-dir", eval_data, "directory with IDX files")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");
  eval_cmd->add_option("--out", eval_out, "directory for metrics.csv (optional)");

  // impute
  std::string impute_ckpt, impute_data, impute_out;
  std::uint64_t impute_mask_seed = 0;
  CLI::App* impute_cmd =
      app.add_subcommand("impute", "Recover corrupted test images");
  impute_cmd->add_option("--checkpoint", impute_ckpt, "checkpoint file")->required();
  impute_cmd->add_option("--data-dir", impute_data, "directory with IDX files")->required();
  impute_cmd->add_option("--mask-seed", impute_mask_seed, "mask stream seed")->required();
  impute_cmd->add_option("--out", impute_out, "output directory")->required();

  // sample
  std::string sample_ckpt, sample_out;
  int sample_n = 16;
  std::uint64_t sample_seed = 1;
  double sample_nu = 4.0;
  CLI::App* sample_cmd = app.add_subcommand("sample", "Decode draws from the prior");
  sample_cmd->add_option("--checkpoint", sample_ckpt, "checkpoint file")->required();
  sample_cmd->add_option("-n,--count", sample_n, "number of images")->required();
  sample_cmd->add_option("--out", sample_out, "output directory")->required();
  sample_cmd->add_option("--seed", sample_seed, "sampling seed");
  sample_cmd->add_option("--nu", sample_nu,
                         "prior degrees of freedom for Student-t sampling");

  // make-masks
  std::string masks_out;
  int masks_count = 0;
  std::uint64_t masks_seed = 0;
  double masks_fraction = 0.78;
  CLI::App* masks_cmd = app.add_subcommand("make-masks", "Generate an Ising mask cache");
  masks_cmd->add_option("--count", masks_count, "number of masks")->required();
  masks_cmd->add_option("--seed", masks_seed, "rng seed")->required();
  masks_cmd->add_option("--out", masks_out, "output file")->required();
  masks_cmd->add_option("--target-fraction", masks_fraction, "corrupted fraction");

  // search
  std::string search_config, search_data, search_out = ".";
  int search_trials = 0;
  std::uint64_t search_seed = 0;
  CLI::App* search_cmd =
      app.add_subcommand("search", "Random hyperparameter search");
  search_cmd->add_option("--config", search_config, "base config file")->required();
  search_cmd->add_option("--trials", search_trials, "number of trials")->required();
  search_cmd->add_option("--seed", search_seed, "search seed")->required();
  search_cmd->add_option("--data-dir", search_data, "directory with IDX files")->required();
  search_cmd->add_option("--out", search_out, "directory for trials.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      const tvae::TrainConfig cfg = tvae::load_config(train_config);
      const tvae::TrainResult result = tvae::train(cfg, train_data, train_out);
      std::printf("best validation loss: %.6f (checkpoint in %s)\n",
                  result.best.best_val_loss, train_out.c_str());
      if (result.diverged) {
        std::fprintf(stderr, "training diverged; kept the last good checkpoint\n");
        return 2;
      }
    } else if (eval_cmd->parsed()) {
      const tvae::Checkpoint ckpt = tvae::load_checkpoint(eval_ckpt);
      const tvae::EvalReport report = tvae::evaluate(ckpt, eval_data, eval_split);
      print_report(report);
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        tvae::write_metrics_csv(report,
                                std::filesystem::path(eval_out) / "metrics.csv");
      }
    } else if (impute_cmd->parsed()) {
      const tvae::Checkpoint ckpt = tvae::load_checkpoint(impute_ckpt);
      tvae::impute(ckpt, impute_data, impute_mask_seed, impute_out);
      std::printf("wrote 5 grids + metrics.csv to %s\n", impute_out.c_str());
    } else if (sample_cmd->parsed()) {
      const tvae::Checkpoint ckpt = tvae::load_checkpoint(sample_ckpt);
      const tvae::VaeModel model =
          tvae::VaeModel::from_layers(ckpt.config, ckpt.layers);
      const std::size_t p = static_cast<std::size_t>(ckpt.config.latent_dim());
      tvae::RngState rng(sample_seed);
      tvae::Matrix z(static_cast<std::size_t>(sample_n), p);
      if (ckpt.config.prior == tvae::PriorKind::kStudentT) {
        tvae::TDistParams prior{std::vector<double>(p, 0.0),
                                std::vector<double>(p, 1.0), sample_nu};
        for (int i = 0; i < sample_n; ++i) {
          const std::vector<double> draw = tvae::sample_student_t(prior, rng);
          for (std::size_t j = 0; j < p; ++j) z(i, j) = draw[j];
        }
      } else {
        for (double& v : z.span()) v = rng.normal();
      }
      const tvae::Matrix images = model.decode_latent(z);
      std::vector<tvae::Matrix> grid;
      for (int i = 0; i < sample_n; ++i) {
        grid.push_back(tvae::image_from_row(images, i));
      }
      std::filesystem::create_directories(sample_out);
      tvae::export_pgm_grid(grid, 8, std::filesystem::path(sample_out) / "samples.pgm");
      std::printf("wrote samples.pgm to %s\n", sample_out.c_str());
    } else if (masks_cmd->parsed()) {
      tvae::IsingConfig cfg;
      cfg.target_fraction = masks_fraction;
      cfg = tvae::resolve_ising(cfg, masks_seed);
      tvae::RngState rng(masks_seed);
      const tvae::BoolMatrix masks =
          tvae::generate_ising_masks(rng, cfg, static_cast<std::size_t>(masks_count));
      tvae::save_mask_cache(masks, masks_out);
      const double fraction = static_cast<double>(masks.count()) /
                              static_cast<double>(masks.size());
      std::printf("wrote %d masks to %s (corrupted fraction %.3f)\n", masks_count,
                  masks_out.c_str(), fraction);
    } else if (search_cmd->parsed()) {
      const tvae::TrainConfig base = tvae::load_config(search_config);
      const tvae::ImageDataset data =
          tvae::load_idx_images(tvae::train_images_path(search_data));
      const auto trials =
          tvae::random_search(base, search_trials, search_seed, data, search_out);
      std::printf("trial,hidden,lr,activation,batch_size,best_val_loss\n");
      for (const tvae::SearchTrial& trial : trials) {
        std::printf("%d,%d,%.3e,%s,%d,%.6f\n", trial.trial,
                    trial.cfg.encoder_layers.front(), trial.cfg.lr,
                    tvae::ad::to_string(trial.cfg.activation).c_str(),
                    trial.cfg.batch_size, trial.best_val_loss);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
