#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tvae/ising.hpp"

using namespace tvae;

namespace {

double corrupted_fraction(const BoolMatrix& masks) {
  return static_cast<double>(masks.count()) / static_cast<double>(masks.size());
}

// Mean rate at which 4-neighbour pairs agree, over all masks.
double neighbor_agreement(const BoolMatrix& masks) {
  std::size_t agree = 0, pairs = 0;
  for (std::size_t m = 0; m < masks.rows(); ++m) {
    const auto row = masks.row(m);
    for (int r = 0; r < 28; ++r) {
      for (int c = 0; c < 28; ++c) {
        if (c + 1 < 28) {
          agree += row[r * 28 + c] == row[r * 28 + c + 1];
          ++pairs;
        }
        if (r + 1 < 28) {
          agree += row[r * 28 + c] == row[(r + 1) * 28 + c];
          ++pairs;
        }
      }
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("calibrated default config hits the target corruption band") {
  const IsingConfig cfg = resolve_ising(IsingConfig{}, 11);
  RngState rng(12);
  const BoolMatrix masks = generate_ising_masks(rng, cfg, 500);
  const double fraction = corrupted_fraction(masks);
  CHECK(fraction > 0.73);
  CHECK(fraction < 0.83);
}

TEST_CASE("J = 0 gives an uncorrelated lattice") {
  IsingConfig cfg;
  cfg.coupling = 0.0;
  cfg = resolve_ising(cfg, 21);
  RngState rng(22);
  const BoolMatrix masks = generate_ising_masks(rng, cfg, 500);
  const double f = corrupted_fraction(masks);
  const double baseline = f * f + (1.0 - f) * (1.0 - f);
  const double agreement = neighbor_agreement(masks);
  // SE of the per-mask agreement mean over 500 masks, conservative bound
  const double pair_count = 500.0 * (2.0 * 27.0 * 28.0);
  const double se = std::sqrt(0.25 / pair_count) * 3.0;  // i.i.d. pairs inflate x3
  CHECK(std::fabs(agreement - baseline) < 2.0 * se + 0.01);
}

TEST_CASE("default coupling produces spatially correlated masks") {
  const IsingConfig cfg = resolve_ising(IsingConfig{}, 31);
  RngState rng(32);
  const BoolMatrix masks = generate_ising_masks(rng, cfg, 500);
  const double f = corrupted_fraction(masks);
  const double baseline = f * f + (1.0 - f) * (1.0 - f);
  CHECK(neighbor_agreement(masks) >= baseline + 0.05);
}

TEST_CASE("mask generation is bit-reproducible") {
  const IsingConfig cfg = resolve_ising(IsingConfig{}, 41);
  RngState r1(5), r2(5);
  CHECK(generate_ising_mask(r1, cfg) == generate_ising_mask(r2, cfg));
}

TEST_CASE("unresolved field is rejected") {
  RngState rng(1);
  CHECK_THROWS_AS(generate_ising_mask(rng, IsingConfig{}), std::invalid_argument);
  IsingConfig bad;
  bad.sweeps = 0;
  CHECK_THROWS_AS(generate_ising_mask(rng, bad), std::invalid_argument);
}

TEST_CASE("mask cache round-trip") {
  const IsingConfig cfg = resolve_ising(IsingConfig{}, 51);
  RngState rng(52);
  const BoolMatrix masks = generate_ising_masks(rng, cfg, 37);
  const auto path = std::filesystem::temp_directory_path() / "tvae_test_masks.tvmk";
  save_mask_cache(masks, path);
  const BoolMatrix loaded = load_mask_cache(path);
  CHECK(loaded == masks);
  std::filesystem::remove(path);
}
