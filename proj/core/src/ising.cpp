#include "tvae/ising.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "tvae/autodiff.hpp"

namespace tvae {

void IsingConfig::validate() const {
  if (!(coupling >= 0.0)) {
    throw std::invalid_argument("IsingConfig: coupling must be >= 0");
  }
  if (sweeps < 1) {
    throw std::invalid_argument("IsingConfig: sweeps must be >= 1");
  }
  if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
    throw std::invalid_argument("IsingConfig: target_fraction must be in (0,1)");
  }
}

std::vector<std::uint8_t> generate_ising_mask(RngState& rng,
                                              const IsingConfig& cfg) {
  cfg.validate();
  if (!cfg.field_resolved()) {
    throw std::invalid_argument(
        "generate_ising_mask: field is unresolved; call resolve_ising first");
  }
  constexpr int side = static_cast<int>(kMaskSide);
  // Gibbs flip probabilities depend only on the integer neighbour sum.
  std::array<double, 9> p_up{};
  for (int s = -4; s <= 4; ++s) {
    p_up[s + 4] = ad::sigmoid(2.0 * (cfg.coupling * s + cfg.field));
  }

  std::array<std::int8_t, kMaskPixels> spins{};
  for (auto& s : spins) s = rng.uniform() < cfg.target_fraction ? 1 : -1;

  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        int nbr = 0;
        if (r > 0) nbr += spins[(r - 1) * side + c];
        if (r + 1 < side) nbr += spins[(r + 1) * side + c];
        if (c > 0) nbr += spins[r * side + c - 1];
        if (c + 1 < side) nbr += spins[r * side + c + 1];
        spins[r * side + c] = rng.uniform() < p_up[nbr + 4] ? 1 : -1;
      }
    }
  }

  std::vector<std::uint8_t> mask(kMaskPixels);
  for (std::size_t i = 0; i < kMaskPixels; ++i) mask[i] = spins[i] > 0 ? 1 : 0;
  return mask;
}

BoolMatrix generate_ising_masks(RngState& rng, const IsingConfig& cfg,
                                std::size_t count) {
  BoolMatrix masks(count, kMaskPixels);
  for (std::size_t m = 0; m < count; ++m) {
    const std::vector<std::uint8_t> one = generate_ising_mask(rng, cfg);
    auto row = masks.row(m);
    std::copy(one.begin(), one.end(), row.begin());
  }
  return masks;
}

double calibrate_ising_field(const IsingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  constexpr std::size_t kPilotMasks = 64;
  const auto pilot_fraction = [&](double field) {
    IsingConfig trial = cfg;
    trial.field = field;
    RngState rng(mix_seed(seed, 0xca11b));  // same stream for every candidate
    std::size_t corrupted = 0;
    for (std::size_t m = 0; m < kPilotMasks; ++m) {
      for (std::uint8_t bit : generate_ising_mask(rng, trial)) corrupted += bit;
    }
    return static_cast<double>(corrupted) /
           static_cast<double>(kPilotMasks * kMaskPixels);
  };

  double lo = -4.0, hi = 4.0;
  double mid = 0.0;
  for (int iter = 0; iter < 60; ++iter) {
    mid = 0.5 * (lo + hi);
    const double frac = pilot_fraction(mid);
    if (std::fabs(frac - cfg.target_fraction) <= 0.01) return mid;
    if (frac < cfg.target_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

IsingConfig resolve_ising(IsingConfig cfg, std::uint64_t seed) {
  if (!cfg.field_resolved()) {
    cfg.field = calibrate_ising_field(cfg, seed);
  }
  return cfg;
}

void save_mask_cache(const BoolMatrix& masks, const std::filesystem::path& path) {
  if (masks.cols() != kMaskPixels) {
    throw std::invalid_argument("save_mask_cache: masks must have 784 columns");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write("TVMK", 4);
  const unsigned char version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  const std::uint32_t count = static_cast<std::uint32_t>(masks.rows());
  unsigned char le[4] = {static_cast<unsigned char>(count),
                         static_cast<unsigned char>(count >> 8),
                         static_cast<unsigned char>(count >> 16),
                         static_cast<unsigned char>(count >> 24)};
  out.write(reinterpret_cast<const char*>(le), 4);
  const std::size_t bytes_per_mask = (kMaskPixels + 7) / 8;
  std::vector<unsigned char> packed(bytes_per_mask);
  for (std::size_t m = 0; m < masks.rows(); ++m) {
    std::fill(packed.begin(), packed.end(), 0);
    for (std::size_t i = 0; i < kMaskPixels; ++i) {
      if (masks(m, i)) packed[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
    }
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

BoolMatrix load_mask_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "TVMK") {
    throw std::runtime_error(path.string() + ": bad mask cache magic");
  }
  unsigned char version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  if (!in || version != 1) {
    throw std::runtime_error(path.string() + ": unsupported mask cache version " +
                             std::to_string(int(version)));
  }
  unsigned char le[4];
  in.read(reinterpret_cast<char*>(le), 4);
  if (!in) throw std::runtime_error(path.string() + ": truncated mask cache");
  const std::uint32_t count = std::uint32_t(le[0]) | (std::uint32_t(le[1]) << 8) |
                              (std::uint32_t(le[2]) << 16) |
                              (std::uint32_t(le[3]) << 24);
  const std::size_t bytes_per_mask = (kMaskPixels + 7) / 8;
  BoolMatrix masks(count, kMaskPixels);
  std::vector<unsigned char> packed(bytes_per_mask);
  for (std::uint32_t m = 0; m < count; ++m) {
    in.read(reinterpret_cast<char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
    if (!in) throw std::runtime_error(path.string() + ": truncated mask cache");
    for (std::size_t i = 0; i < kMaskPixels; ++i) {
      masks(m, i) = (packed[i / 8] >> (i % 8)) & 1u;
    }
  }
  return masks;
}

}  // namespace tvae
