#include "tvae/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tvae {

AdamState AdamState::like(std::span<const Matrix* const> params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Matrix* p : params) {
    state.m.emplace_back(p->rows(), p->cols());
    state.v.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(std::span<Matrix* const> params,
               std::span<const Matrix* const> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (!p.same_shape(g) || !p.same_shape(m)) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " +
                                  std::to_string(i) + ": " + p.shape_string() +
                                  " vs " + g.shape_string());
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace tvae
