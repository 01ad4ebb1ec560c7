#include <benchmark/benchmark.h>

#include "tvae/autodiff.hpp"
#include "tvae/distributions.hpp"
#include "tvae/ising.hpp"
#include "tvae/rng.hpp"
#include "tvae/special_functions.hpp"
#include "tvae/ssim.hpp"

namespace {

void BM_AffineBackward(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  tvae::RngState rng(7);
  tvae::Matrix x(batch, 784), w(784, 128), b(1, 128);
  for (double& v : x.span()) v = rng.uniform();
  for (double& v : w.span()) v = 0.01 * rng.normal();
  for (auto _ : state) {
    tvae::ad::Graph graph;
    auto xv = graph.leaf(x);
    auto wv = graph.leaf(w);
    auto bv = graph.leaf(b);
    auto h = tvae::ad::activation(tvae::ad::affine(xv, wv, bv),
                                  tvae::ad::Activation::kRelu);
    auto loss = tvae::ad::mean_all(h);
    graph.backward(loss);
    benchmark::DoNotOptimize(wv.grad().data());
  }
}
BENCHMARK(BM_AffineBackward)->Arg(32)->Arg(128);

void BM_SampleGamma(benchmark::State& state) {
  tvae::RngState rng(11);
  double acc = 0.0;
  for (auto _ : state) {
    acc += tvae::sample_gamma(rng, 2.5).z;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_SampleGamma);

void BM_GammaCdfGrad(benchmark::State& state) {
  double x = 0.1;
  for (auto _ : state) {
    const auto eval = tvae::gamma_cdf(x, 2.5);
    benchmark::DoNotOptimize(eval.d_dalpha);
    x = x < 8.0 ? x + 0.1 : 0.1;
  }
}
BENCHMARK(BM_GammaCdfGrad);

void BM_Ssim(benchmark::State& state) {
  tvae::RngState rng(3);
  tvae::Matrix a(28, 28), b(28, 28);
  for (double& v : a.span()) v = rng.uniform();
  for (double& v : b.span()) v = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvae::ssim(a, b));
  }
}
BENCHMARK(BM_Ssim);

void BM_IsingMask(benchmark::State& state) {
  tvae::IsingConfig cfg;
  cfg.field = 0.5;
  tvae::RngState rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvae::generate_ising_mask(rng, cfg));
  }
}
BENCHMARK(BM_IsingMask);

}  // namespace

BENCHMARK_MAIN();
