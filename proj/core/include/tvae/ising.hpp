#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "tvae/matrix.hpp"
#include "tvae/rng.hpp"

namespace tvae {

/// Square-lattice Ising mask generator settings. Spins +1 map to corrupted
/// pixels; the external field is calibrated so the expected corrupted
/// fraction hits target_fraction. A NaN field means "calibrate me".
struct IsingConfig {
  double coupling = 0.35;
  double field = std::numeric_limits<double>::quiet_NaN();
  int sweeps = 60;
  double target_fraction = 0.78;

  bool field_resolved() const { return field == field; }
  void validate() const;
};

inline constexpr std::size_t kMaskSide = 28;
inline constexpr std::size_t kMaskPixels = kMaskSide * kMaskSide;

/// One 28x28 mask (row-major, true = corrupted) from Gibbs sweeps over a
/// free-boundary 4-neighbour lattice. Requires a resolved field.
std::vector<std::uint8_t> generate_ising_mask(RngState& rng, const IsingConfig& cfg);

/// Stacks `count` masks drawn sequentially from one rng into a BoolMatrix
/// [count x 784].
BoolMatrix generate_ising_masks(RngState& rng, const IsingConfig& cfg,
                                std::size_t count);

/// Bisects the external field over a 64-mask pilot batch (common random
/// numbers, so the pilot fraction is monotone in the field) until the pilot
/// mean corrupted fraction is within 0.01 of cfg.target_fraction.
double calibrate_ising_field(const IsingConfig& cfg, std::uint64_t seed);

/// Returns cfg with the field filled in (calibrating when NaN).
IsingConfig resolve_ising(IsingConfig cfg, std::uint64_t seed);

/// Mask cache file: magic "TVMK", version u8 = 1, count u32 little-endian,
/// then count x 784 bits packed row-major, LSB first within each byte.
void save_mask_cache(const BoolMatrix& masks, const std::filesystem::path& path);
BoolMatrix load_mask_cache(const std::filesystem::path& path);

}  // namespace tvae
