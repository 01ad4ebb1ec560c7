#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "tvae/distributions.hpp"
#include "tvae/gradcheck.hpp"
#include "tvae/special_functions.hpp"

using namespace tvae;

TEST_CASE("normal sampler determinism") {
  RngState a(42), b(42);
  const auto va = sample_standard_normal(a, 1000);
  const auto vb = sample_standard_normal(b, 1000);
  CHECK(va == vb);
}

TEST_CASE("normal sampler moments and KS") {
  RngState rng(7);
  const auto v = sample_standard_normal(rng, 100000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= (v.size() - 1);
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var > 0.98);
  CHECK(var < 1.02);
  CHECK(test::ks_statistic(v, test::normal_cdf) < 0.006);
}

TEST_CASE("gamma sampler moments") {
  {
    RngState rng(11);
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) mean += sample_gamma(rng, 3.0).z;
    mean /= 100000.0;
    CHECK(mean > 2.95);
    CHECK(mean < 3.05);
  }
  {
    RngState rng(13);  // boost path, alpha < 1
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) mean += sample_gamma(rng, 0.5).z;
    mean /= 100000.0;
    CHECK(mean > 0.47);
    CHECK(mean < 0.53);
  }
  RngState r1(5), r2(5);
  CHECK(sample_gamma(r1, 2.3).z == sample_gamma(r2, 2.3).z);
}

TEST_CASE("implicit gradient matches the quantile finite-difference oracle") {
  for (double alpha : {0.6, 1.0, 2.0, 5.0, 20.0}) {
    for (double u : {0.1, 0.5, 0.9}) {
      const double z = gamma_quantile(u, alpha);
      const GammaGrad grad = gamma_implicit_grad({z, alpha});
      CHECK(!grad.clamped);
      CHECK(grad.dz_dalpha > 0.0);
      const double oracle = test::quantile_fd_dalpha(u, alpha);
      CHECK(std::fabs(grad.dz_dalpha - oracle) / std::fabs(oracle) < 1e-4);
    }
  }
}

TEST_CASE("implicit gradient at the exponential median") {
  // alpha = 1, u = 0.5: z = ln 2 exactly.
  const double z = gamma_quantile(0.5, 1.0);
  CHECK(z == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const GammaGrad grad = gamma_implicit_grad({z, 1.0});
  const double oracle = test::quantile_fd_dalpha(0.5, 1.0);
  CHECK(std::fabs(grad.dz_dalpha - oracle) / std::fabs(oracle) < 1e-4);
}

TEST_CASE("implicit gradient clamps in the extreme tail") {
  const GammaGrad grad = gamma_implicit_grad({5000.0, 1.0});
  CHECK(grad.clamped);
  CHECK(grad.dz_dalpha == 1e6);
}

TEST_CASE("student_t_logpdf closed forms") {
  {
    // p=1, z=mu: the quadratic term vanishes.
    TDistParams prm{{1.7}, {0.6}, 3.5};
    const double expected = log_gamma(0.5 * (prm.nu + 1.0)) -
                            log_gamma(0.5 * prm.nu) -
                            0.5 * std::log(test::kPi * prm.nu) - std::log(0.6);
    const std::vector<double> z = {1.7};
    CHECK(student_t_logpdf(z, prm) == doctest::Approx(expected).epsilon(1e-13));
  }
  {
    // standard Cauchy at the mode
    TDistParams prm{{0.0}, {1.0}, 1.0};
    const std::vector<double> z = {0.0};
    CHECK(student_t_logpdf(z, prm) ==
          doctest::Approx(std::log(1.0 / test::kPi)).epsilon(1e-12));
  }
}

TEST_CASE("student_t_logpdf normalizes to 1") {
  TDistParams prm{{0.0}, {1.0}, 4.0};
  const double mass = test::integrate(
      [&](double z) {
        const std::vector<double> zv = {z};
        return std::exp(student_t_logpdf(zv, prm));
      },
      -50.0, 50.0, 1e-9);
  CHECK(std::fabs(mass - 1.0) < 1e-6);
}

TEST_CASE("TDistParams validation") {
  CHECK_THROWS_AS((TDistParams{{0.0}, {0.0}, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TDistParams{{0.0}, {1.0}, 0.4}.validate(0.5)), std::invalid_argument);
  CHECK_THROWS_AS((TDistParams{{}, {}, 2.0}.validate()), std::invalid_argument);
}

TEST_CASE("latent node recovers the location under forced zero noise") {
  ad::Graph g;
  auto mu = g.leaf(Matrix(1, 3, {0.3, -1.1, 2.4}));
  auto sigma = g.leaf(Matrix::full(1, 3, 0.7));
  auto nu = g.leaf(Matrix(1, 1, {5.0}));
  NoiseSession noise({Matrix(1, 3)}, {{0.5}});  // x = 0, gamma at its median
  auto latent = sample_student_t_latent(mu, sigma, nu, noise);
  CHECK(latent.value()(0, 0) == doctest::Approx(0.3));
  CHECK(latent.value()(0, 1) == doctest::Approx(-1.1));
  CHECK(latent.value()(0, 2) == doctest::Approx(2.4));
}

TEST_CASE("reparameterized draws pass a KS test against the integrated t CDF") {
  const std::size_t n = 100000;
  RngState rng(31);
  NoiseSession noise(rng);
  ad::Graph g;
  auto mu = g.leaf(Matrix(n, 1));
  auto sigma = g.leaf(Matrix::full(n, 1, 1.0));
  auto nu = g.leaf(Matrix::full(n, 1, 4.0));
  auto latent = sample_student_t_latent(mu, sigma, nu, noise);
  std::vector<double> samples(latent.value().span().begin(),
                              latent.value().span().end());
  CHECK(test::ks_statistic_vs_t(samples, 0.0, 1.0, 4.0) < 0.0052);
}

TEST_CASE("latent draw determinism, samples and gradients") {
  const auto run = [] {
    RngState rng(777);
    NoiseSession noise(rng);
    ad::Graph g;
    auto mu = g.leaf(Matrix::full(4, 2, 0.2));
    auto sigma = g.leaf(Matrix::full(4, 2, 0.9));
    auto nu = g.leaf(Matrix::full(4, 1, 3.0));
    auto latent = sample_student_t_latent(mu, sigma, nu, noise);
    auto loss = ad::mean_all(ad::mul(latent, latent));
    g.backward(loss);
    std::vector<double> out(latent.value().span().begin(),
                            latent.value().span().end());
    out.insert(out.end(), nu.grad().span().begin(), nu.grad().span().end());
    out.insert(out.end(), sigma.grad().span().begin(), sigma.grad().span().end());
    return out;
  };
  CHECK(run() == run());
}

namespace {

// loss(mu, sigma, nu) = mean(latent^2) with the noise replayed, as a plain
// function of the three scalars.
double latent_loss(std::span<const double> theta, NoiseSession& noise) {
  noise.rewind();
  ad::Graph g;
  auto mu = g.leaf(Matrix(1, 1, {theta[0]}));
  auto sigma = g.leaf(Matrix(1, 1, {theta[1]}));
  auto nu = g.leaf(Matrix(1, 1, {theta[2]}));
  auto latent = sample_student_t_latent(mu, sigma, nu, noise);
  return ad::mean_all(ad::mul(latent, latent)).value()(0, 0);
}

}  // namespace

TEST_CASE("latent gradients (mu, sigma, nu) match fixed-noise finite differences") {
  RngState rng(2025);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> theta = {0.5 * rng.normal(), 0.5 + rng.uniform(),
                                 1.0 + 4.0 * rng.uniform()};
    NoiseSession noise(rng, NoiseSession::Mode::kRecord);
    ad::Graph g;
    auto mu = g.leaf(Matrix(1, 1, {theta[0]}));
    auto sigma = g.leaf(Matrix(1, 1, {theta[1]}));
    auto nu = g.leaf(Matrix(1, 1, {theta[2]}));
    auto latent = sample_student_t_latent(mu, sigma, nu, noise);
    auto loss = ad::mean_all(ad::mul(latent, latent));
    g.backward(loss);
    const double analytic[3] = {mu.grad()(0, 0), sigma.grad()(0, 0),
                                nu.grad()(0, 0)};

    noise.start_replay();
    const std::vector<double> numeric = finite_diff_gradient(
        [&](std::span<const double> p) { return latent_loss(p, noise); }, theta,
        1e-5);

    for (int i = 0; i < 3; ++i) {
      const double scale =
          std::max({std::fabs(numeric[i]), std::fabs(analytic[i]), 1e-8});
      CHECK(std::fabs(analytic[i] - numeric[i]) / scale < 1e-3);
    }
  }
}

TEST_CASE("pathwise sigma gradient is unbiased at desk scale") {
  // f(latent) = latent^2 at (mu=0, sigma=1, nu=8): the MC mean of the
  // pathwise d/dsigma over many draws must match a finite difference of the
  // MC mean computed with common random numbers.
  const std::size_t n = 100000;
  RngState rng(88);
  NoiseSession noise(rng, NoiseSession::Mode::kRecord);
  ad::Graph g;
  auto mu = g.leaf(Matrix(n, 1));
  auto sigma = g.leaf(Matrix::full(n, 1, 1.0));
  auto nu = g.leaf(Matrix::full(n, 1, 8.0));
  auto latent = sample_student_t_latent(mu, sigma, nu, noise);
  auto loss = ad::mean_all(ad::mul(latent, latent));
  g.backward(loss);
  // mean over draws of the per-draw pathwise derivative
  double grad_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) grad_mean += sigma.grad()(i, 0);

  // the same mean by common-random-number finite differences over sigma
  noise.start_replay();
  const auto mc_mean = [&](double s) {
    noise.rewind();
    ad::Graph g2;
    auto mu2 = g2.leaf(Matrix(n, 1));
    auto sigma2 = g2.leaf(Matrix::full(n, 1, s));
    auto nu2 = g2.leaf(Matrix::full(n, 1, 8.0));
    auto latent2 = sample_student_t_latent(mu2, sigma2, nu2, noise);
    return ad::mean_all(ad::mul(latent2, latent2)).value()(0, 0);
  };
  const double eps = 1e-4;
  const double fd = (mc_mean(1.0 + eps) - mc_mean(1.0 - eps)) / (2.0 * eps);

  // per-draw variance of the pathwise derivative for the SE of the mean
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = sigma.grad()(i, 0) * n - grad_mean;  // undo the 1/n in mean_all
    var += d * d;
  }
  var /= (n - 1);
  const double se = std::sqrt(var / n);
  CHECK(std::fabs(grad_mean - fd) < 3.0 * se + 1e-6);
}
