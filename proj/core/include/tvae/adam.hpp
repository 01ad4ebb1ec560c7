#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvae/matrix.hpp"

namespace tvae {

/// Adam first/second-moment state, one tensor per parameter tensor.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(std::span<const Matrix* const> params);
};

/// Standard Adam update with bias correction; increments state.t once per
/// call. grads[i] must match params[i] in shape.
void adam_step(std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, AdamState& state,
               double lr);

}  // namespace tvae
