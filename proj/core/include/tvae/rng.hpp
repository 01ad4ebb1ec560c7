#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tvae {

/// Deterministic random stream: identical seed + call sequence gives
/// identical draws. Uniforms come straight from the mt19937_64 output (the
/// raw sequence is pinned by the standard), and normals use the
/// trigonometric Box-Muller transform with a cached spare, so no
/// implementation-defined std distributions are involved.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound) { return engine_() % bound; }

  double normal();

  std::vector<double> normal_vector(std::size_t n) {
    std::vector<double> out(n);
    for (double& x : out) x = normal();
    return out;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64-style mixing for deriving independent substream seeds, e.g.
/// one mask lattice per image index.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace tvae
