#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvae/autodiff.hpp"
#include "tvae/distributions.hpp"
#include "tvae/matrix.hpp"
#include "tvae/rng.hpp"

namespace tvae {

/// Per-batch loss decomposition. total is assembled as
/// recon + kl_weight * kl, exactly, in that floating-point order.
struct ElboTerms {
  double recon = 0.0;  // summed cross-entropy over unmasked pixels / batch
  double kl = 0.0;     // KL divergence averaged over the batch
  double total = 0.0;
};

struct GaussParams {
  std::vector<double> mu;
  std::vector<double> log_var;
};

/// Closed-form KL(N(mu, diag exp(log_var)) || N(0, I)) for one datum:
/// 0.5 * sum(mu^2 + exp(log_var) - 1 - log_var).
double kl_gaussian(const GaussParams& params);

/// Batch-mean Gaussian KL node; mu and log_var are [B x p], result is 1x1.
ad::Var kl_gaussian_node(ad::Var mu, ad::Var log_var);

/// Student-t KL node built from reparameterized posterior draws:
///   -sum_i log sigma_i
///   - ((nu+p)/2) * (psi((nu+p)/2) - psi(nu/2))        [closed form]
///   + ((nu+p)/2) * (1/K) sum_k log(1 + z_k^T z_k / nu) [Monte Carlo]
/// averaged over the batch. Differentiable in mu, sigma, nu through both the
/// closed-form and the sampled paths.
ad::Var kl_student_t_node(ad::Var mu, ad::Var sigma, ad::Var nu,
                          std::span<const ad::Var> latent_draws);

/// Single-datum convenience: builds leaves for params, draws mc_samples
/// latents, returns the scalar KL node.
ad::Var kl_student_t(ad::Graph& graph, const TDistParams& params,
                     std::size_t mc_samples, RngState& rng);

struct McEstimate {
  double mean;
  double std_error;  // of the Monte-Carlo part
};

/// Graph-free estimator of the same quantity for large K (verification and
/// reporting); the closed-form part is exact, the MC part carries the SE.
McEstimate kl_student_t_estimate(const TDistParams& params,
                                 std::size_t mc_samples, RngState& rng);

/// Numerically stable binary cross-entropy with logits, summed over
/// unmasked entries and divided by the batch size. mask entries that are
/// true (corrupted) are excluded; a null mask means every pixel counts.
/// Targets must lie in [0, 1].
ad::Var bce_reconstruction(ad::Var logits, const Matrix& targets,
                           const BoolMatrix* mask = nullptr);

struct ElboNodes {
  ad::Var recon;
  ad::Var kl;
  ad::Var total;
  double kl_weight = 1.0;

  ElboTerms terms() const {
    return {recon.value()(0, 0), kl.value()(0, 0), total.value()(0, 0)};
  }
};

/// total = recon + kl_weight * kl as a graph node.
ElboNodes assemble_elbo(ad::Var recon, ad::Var kl, double kl_weight);

}  // namespace tvae
