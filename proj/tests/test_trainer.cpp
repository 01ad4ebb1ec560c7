#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tvae/adam.hpp"
#include "tvae/checkpoint.hpp"
#include "tvae/config.hpp"
#include "tvae/dataset.hpp"
#include "tvae/gradcheck.hpp"
#include "tvae/model.hpp"
#include "tvae/trainer.hpp"

using namespace tvae;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

TrainConfig tiny_config(PriorKind prior) {
  TrainConfig cfg;
  cfg.prior = prior;
  cfg.encoder_layers = {5, 2};
  cfg.decoder_layers = {2, 5};
  cfg.activation = ad::Activation::kTanh;
  cfg.lr = 1e-3;
  cfg.batch_size = 3;
  cfg.epochs = 2;
  cfg.seed = 7;
  cfg.kl_mc_samples = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config text round-trips field for field") {
  TrainConfig cfg = tiny_config(PriorKind::kStudentT);
  cfg.lr = 3.7e-4;
  cfg.kl_weight = 0.25;
  cfg.masking = true;
  cfg.ising.field = 0.8123;
  const std::string text = to_text(cfg);
  const TrainConfig back = parse_config(text);
  CHECK(to_text(back) == text);
}

TEST_CASE("config parser rejects bad input") {
  CHECK_THROWS_WITH_AS(parse_config("nonsense_key = 3\n"),
                       doctest::Contains("unknown"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("lr = 0.1\nlr = 0.2\n"
                                    "encoder_layers = 4, 2\ndecoder_layers = 2, 4\n"),
                       doctest::Contains("duplicate"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("encoder_layers = 4, 2\ndecoder_layers = 3, 4\n"),
                  std::invalid_argument);  // latent dims disagree
  CHECK_THROWS_AS(parse_config("encoder_layers = abc\ndecoder_layers = 2\n"),
                  std::invalid_argument);
}

TEST_CASE("paper presets load and validate") {
  const std::filesystem::path dir = TVAE_CONFIG_DIR;
  for (const char* name : {"vae-g-full.cfg", "vae-st-full.cfg",
                           "vae-g-masked.cfg", "vae-st-masked.cfg",
                           "vae-g-desk.cfg", "vae-st-desk.cfg",
                           "vae-g-desk-masked.cfg", "vae-st-desk-masked.cfg"}) {
    const TrainConfig cfg = load_config((dir / name).string());
    cfg.validate();
  }
  const TrainConfig st = load_config((dir / "vae-st-full.cfg").string());
  CHECK(st.encoder_layers == std::vector<int>{1419, 42});
  CHECK(st.decoder_layers == std::vector<int>{42, 759});
  CHECK(st.activation == ad::Activation::kRelu);
  CHECK(st.lr == 1e-4);
  CHECK(st.batch_size == 500);
  CHECK(st.epochs == 150);
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  Matrix w(2, 2, {1.0, -2.0, 0.5, 3.0});
  Matrix g(2, 2);
  std::vector<Matrix*> params = {&w};
  std::vector<const Matrix*> grads = {&g};
  AdamState state = AdamState::like(std::vector<const Matrix*>{&w});
  adam_step(params, grads, state, 0.01);
  CHECK(w(0, 0) == 1.0);
  CHECK(w(1, 1) == 3.0);
  for (double x : state.m[0].span()) CHECK(x == 0.0);
  for (double x : state.v[0].span()) CHECK(x == 0.0);
  CHECK(state.t == 1);
}

TEST_CASE("adam: hand-computed single step") {
  // w = 0, g = 0.1, lr = 1e-3, t: 0 -> 1:
  //   m = 0.1*0.1 = 0.01,        m_hat = m / (1 - 0.9)   = 0.1
  //   v = 0.001*0.01 = 1e-5,     v_hat = v / (1 - 0.999) = 0.01
  //   w -= lr * m_hat / (sqrt(v_hat) + eps)
  Matrix w(1, 1);
  Matrix g(1, 1, {0.1});
  std::vector<Matrix*> params = {&w};
  std::vector<const Matrix*> grads = {&g};
  AdamState state = AdamState::like(std::vector<const Matrix*>{&w});
  adam_step(params, grads, state, 1e-3);
  const double expected = -1e-3 * 0.1 / (std::sqrt(0.01) + 1e-8);
  CHECK(w(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(w(0, 0) == doctest::Approx(-0.001).epsilon(1e-5));
}

TEST_CASE("adam is deterministic across runs") {
  const auto run = [] {
    RngState rng(3);
    Matrix w(4, 3);
    for (double& x : w.span()) x = rng.normal();
    std::vector<Matrix*> params = {&w};
    AdamState state = AdamState::like(std::vector<const Matrix*>{&w});
    Matrix g(4, 3);
    for (int step = 0; step < 10; ++step) {
      for (double& x : g.span()) x = rng.normal();
      std::vector<const Matrix*> grads = {&g};
      adam_step(params, grads, state, 1e-2);
    }
    return std::vector<double>(w.span().begin(), w.span().end());
  };
  CHECK(run() == run());
}

TEST_CASE("whole-model gradients match common-random-number finite differences") {
  const std::size_t input_dim = 12;
  RngState data_rng(404);
  Matrix x(3, input_dim);
  for (double& v : x.span()) v = data_rng.uniform();

  for (PriorKind prior : {PriorKind::kGaussian, PriorKind::kStudentT}) {
    CAPTURE(to_string(prior));
    TrainConfig cfg = tiny_config(prior);
    RngState init_rng(1234);
    VaeModel model = VaeModel::init(cfg, init_rng, input_dim);

    RngState noise_rng(555);
    NoiseSession noise(noise_rng, NoiseSession::Mode::kRecord);
    ad::Graph graph;
    const auto build = model.build_loss(graph, x, x, nullptr, noise);
    graph.backward(build.elbo.total);

    std::vector<double> analytic;
    for (const ad::Var& v : build.params) {
      analytic.insert(analytic.end(), v.grad().span().begin(),
                      v.grad().span().end());
    }

    const std::vector<double> theta = model.flatten_parameters();
    REQUIRE(theta.size() == analytic.size());

    noise.start_replay();
    VaeModel probe = model;
    const auto numeric = finite_diff_gradient(
        [&](std::span<const double> p) {
          probe.set_parameters(p);
          noise.rewind();
          ad::Graph g2;
          return probe.build_loss(g2, x, x, nullptr, noise)
              .elbo.total.value()(0, 0);
        },
        theta, 1e-5);

    std::size_t checked = 0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double scale =
          std::max({std::fabs(numeric[i]), std::fabs(analytic[i]), 1e-6});
      CHECK(std::fabs(analytic[i] - numeric[i]) / scale < 1e-3);
      ++checked;
    }
    CHECK(checked == theta.size());
  }
}

TEST_CASE("training decreases the loss and selects the best checkpoint") {
  const ImageDataset data = make_synthetic_shapes(256, 31);
  TrainConfig cfg;
  cfg.prior = PriorKind::kStudentT;
  cfg.encoder_layers = {32, 4};
  cfg.decoder_layers = {4, 32};
  cfg.activation = ad::Activation::kRelu;
  cfg.lr = 2e-3;
  cfg.batch_size = 64;
  cfg.epochs = 6;
  cfg.seed = 99;
  cfg.kl_mc_samples = 2;

  const TrainResult result = train_dataset(data, cfg, "");
  REQUIRE(result.logs.size() == 6);
  CHECK(result.logs.back().train_loss < result.logs.front().train_loss);

  double min_val = result.logs.front().val_loss;
  for (const EpochLog& log : result.logs) min_val = std::min(min_val, log.val_loss);
  CHECK(result.best.best_val_loss == min_val);

  // config echo field-for-field
  CHECK(to_text(result.best.config) == to_text(cfg));
}

TEST_CASE("training runs are fully deterministic") {
  const ImageDataset data = make_synthetic_shapes(128, 8);
  TrainConfig cfg;
  cfg.prior = PriorKind::kGaussian;
  cfg.encoder_layers = {16, 3};
  cfg.decoder_layers = {3, 16};
  cfg.batch_size = 32;
  cfg.epochs = 3;
  cfg.seed = 5;

  const TrainResult a = train_dataset(data, cfg, "");
  const TrainResult b = train_dataset(data, cfg, "");
  REQUIRE(a.logs.size() == b.logs.size());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    CHECK(a.logs[i].train_loss == b.logs[i].train_loss);
    CHECK(a.logs[i].val_loss == b.logs[i].val_loss);
    CHECK(a.logs[i].recon == b.logs[i].recon);
    CHECK(a.logs[i].kl == b.logs[i].kl);
  }
  for (std::size_t l = 0; l < a.best.layers.size(); ++l) {
    const auto& wa = a.best.layers[l].weight;
    const auto& wb = b.best.layers[l].weight;
    for (std::size_t i = 0; i < wa.size(); ++i) CHECK(wa[i] == wb[i]);
  }
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
  const ImageDataset data = make_synthetic_shapes(64, 12);
  TrainConfig cfg;
  cfg.prior = PriorKind::kStudentT;
  cfg.encoder_layers = {8, 2};
  cfg.decoder_layers = {2, 8};
  cfg.batch_size = 16;
  cfg.epochs = 2;
  cfg.seed = 77;
  const TrainResult result = train_dataset(data, cfg, "");

  const auto dir = temp_dir("tvae_test_ckpt");
  const auto p1 = dir / "a.tvae";
  const auto p2 = dir / "b.tvae";
  save_checkpoint(result.best, p1);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  CHECK(file_bytes(p1) == file_bytes(p2));

  CHECK(to_text(loaded.config) == to_text(result.best.config));
  REQUIRE(loaded.layers.size() == result.best.layers.size());
  for (std::size_t l = 0; l < loaded.layers.size(); ++l) {
    const auto& wa = loaded.layers[l].weight;
    const auto& wb = result.best.layers[l].weight;
    for (std::size_t i = 0; i < wa.size(); ++i) CHECK(wa[i] == wb[i]);
  }
  CHECK(loaded.adam.t == result.best.adam.t);
  CHECK(loaded.best_val_loss == result.best.best_val_loss);
  CHECK(loaded.seed == result.best.seed);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  const auto dir = temp_dir("tvae_test_ckpt_bad");
  const auto path = dir / "bad.tvae";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("end-to-end: train, evaluate, impute on a temporary data dir") {
  const auto data_dir = temp_dir("tvae_test_data");
  save_idx_images(make_synthetic_shapes(192, 21), train_images_path(data_dir));
  save_idx_images(make_synthetic_shapes(48, 22), test_images_path(data_dir));

  TrainConfig cfg;
  cfg.prior = PriorKind::kStudentT;
  cfg.encoder_layers = {24, 4};
  cfg.decoder_layers = {4, 24};
  cfg.batch_size = 48;
  cfg.epochs = 2;
  cfg.seed = 3;
  cfg.kl_mc_samples = 2;
  cfg.masking = true;
  cfg.ising.sweeps = 12;  // keep the unit test quick

  const auto out_dir = temp_dir("tvae_test_out");
  const TrainResult result = train(cfg, data_dir, out_dir);
  CHECK(std::filesystem::exists(out_dir / "checkpoint.tvae"));
  CHECK(std::filesystem::exists(out_dir / "train_log.csv"));
  // resolved field is echoed so evaluation reproduces the same masks
  CHECK(result.best.config.ising.field_resolved());

  const Checkpoint ckpt = load_checkpoint(out_dir / "checkpoint.tvae");
  const EvalReport report = evaluate(ckpt, data_dir, "test");
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].model == "vae-st");
  CHECK(report.rows[1].model == "mean_impute");
  CHECK(report.rows[0].split == "test");
  CHECK(report.rows[0].n_images == 48);
  CHECK(std::isfinite(report.mean_neg_elbo));

  const EvalReport again = evaluate(ckpt, data_dir, "test");
  CHECK(report.rows[0].mean_ssim == again.rows[0].mean_ssim);
  CHECK(report.mean_neg_elbo == again.mean_neg_elbo);

  const auto impute_dir = temp_dir("tvae_test_impute");
  impute(ckpt, data_dir, 909, impute_dir);
  std::size_t pgm_count = 0, csv_count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(impute_dir)) {
    if (entry.path().extension() == ".pgm") ++pgm_count;
    if (entry.path().extension() == ".csv") ++csv_count;
  }
  CHECK(pgm_count == 5);
  CHECK(csv_count == 1);

  // fixed mask seed => bit-identical grids
  const auto impute_dir2 = temp_dir("tvae_test_impute2");
  impute(ckpt, data_dir, 909, impute_dir2);
  CHECK(file_bytes(impute_dir / "reconstructions.pgm") ==
        file_bytes(impute_dir2 / "reconstructions.pgm"));
  CHECK(file_bytes(impute_dir / "masks.pgm") ==
        file_bytes(impute_dir2 / "masks.pgm"));

  // impute demands a masking checkpoint
  Checkpoint unmasked = ckpt;
  unmasked.config.masking = false;
  CHECK_THROWS_AS(impute(unmasked, data_dir, 1, impute_dir), std::invalid_argument);

  std::filesystem::remove_all(data_dir);
  std::filesystem::remove_all(out_dir);
  std::filesystem::remove_all(impute_dir);
  std::filesystem::remove_all(impute_dir2);
}

TEST_CASE("random search is seeded and ranked") {
  const ImageDataset data = make_synthetic_shapes(96, 41);
  TrainConfig base;
  base.prior = PriorKind::kGaussian;
  base.encoder_layers = {16, 3};
  base.decoder_layers = {3, 16};
  base.batch_size = 32;
  base.epochs = 2;
  base.seed = 1;

  const auto trials_a = random_search(base, 3, 17, data, "");
  const auto trials_b = random_search(base, 3, 17, data, "");
  REQUIRE(trials_a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(trials_a[i].trial == trials_b[i].trial);
    CHECK(trials_a[i].best_val_loss == trials_b[i].best_val_loss);
    CHECK(to_text(trials_a[i].cfg) == to_text(trials_b[i].cfg));
  }
  for (std::size_t i = 1; i < trials_a.size(); ++i) {
    CHECK(trials_a[i - 1].best_val_loss <= trials_a[i].best_val_loss);
  }

  const auto single = random_search(base, 1, 23, data, "");
  CHECK(single.size() == 1);
}
