#include "tvae/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tvae/special_functions.hpp"

namespace tvae {

double kl_gaussian(const GaussParams& params) {
  if (params.mu.size() != params.log_var.size()) {
    throw std::invalid_argument("kl_gaussian: mu/log_var sizes " +
                                std::to_string(params.mu.size()) + " vs " +
                                std::to_string(params.log_var.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < params.mu.size(); ++i) {
    const double m = params.mu[i];
    const double lv = params.log_var[i];
    acc += m * m + std::exp(lv) - 1.0 - lv;
  }
  return 0.5 * acc;
}

ad::Var kl_gaussian_node(ad::Var mu, ad::Var log_var) {
  if (!mu.value().same_shape(log_var.value())) {
    throw std::invalid_argument("kl_gaussian_node: mu " +
                                mu.value().shape_string() + " vs log_var " +
                                log_var.value().shape_string());
  }
  ad::Graph& graph = mu.graph();
  const std::size_t batch = mu.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.value().size(); ++i) {
    const double m = mu.value()[i];
    const double lv = log_var.value()[i];
    acc += m * m + std::exp(lv) - 1.0 - lv;
  }
  Matrix value(1, 1);
  value(0, 0) = 0.5 * acc * inv_batch;
  ad::Node* mu_n = mu.node();
  ad::Node* lv_n = log_var.node();
  ad::Var out = graph.make(std::move(value), {mu_n, lv_n}, nullptr);
  ad::Node* self = out.node();
  self->backward = [self, mu_n, lv_n, inv_batch]() {
    const double g = self->grad(0, 0) * inv_batch;
    for (std::size_t i = 0; i < mu_n->grad.size(); ++i) {
      mu_n->grad[i] += g * mu_n->value[i];
      lv_n->grad[i] += g * 0.5 * (std::exp(lv_n->value[i]) - 1.0);
    }
  };
  return out;
}

namespace {

// ((nu+p)/2) * (psi((nu+p)/2) - psi(nu/2)) on a [B x 1] nu node. This is the
// closed form of E_q[log(1 + Mahalanobis/nu)].
ad::Var digamma_gap_node(ad::Var nu, double p) {
  ad::Graph& graph = nu.graph();
  const std::size_t batch = nu.rows();
  Matrix value(batch, 1);
  for (std::size_t b = 0; b < batch; ++b) {
    const double nu_b = nu.value()(b, 0);
    const double half_sum = 0.5 * (nu_b + p);
    value(b, 0) = half_sum * (digamma(half_sum) - digamma(0.5 * nu_b));
  }
  ad::Node* nu_n = nu.node();
  ad::Var out = graph.make(std::move(value), {nu_n}, nullptr);
  ad::Node* self = out.node();
  self->backward = [self, nu_n, p]() {
    for (std::size_t b = 0; b < self->grad.rows(); ++b) {
      const double nu_b = nu_n->value(b, 0);
      const double half_sum = 0.5 * (nu_b + p);
      const double half_nu = 0.5 * nu_b;
      const double gap = digamma(half_sum) - digamma(half_nu);
      const double gap_dnu =
          0.5 * (detail::trigamma(half_sum) - detail::trigamma(half_nu));
      nu_n->grad(b, 0) += self->grad(b, 0) * (0.5 * gap + half_sum * gap_dnu);
    }
  };
  return out;
}

}  // namespace

ad::Var kl_student_t_node(ad::Var mu, ad::Var sigma, ad::Var nu,
                          std::span<const ad::Var> latent_draws) {
  if (latent_draws.empty()) {
    throw std::invalid_argument("kl_student_t_node: need at least one draw");
  }
  const double p = static_cast<double>(mu.cols());

  ad::Var log_sigma_sum = ad::row_sum(ad::log(sigma));      // [B x 1]
  ad::Var closed = digamma_gap_node(nu, p);                 // [B x 1]

  ad::Var mc_sum;
  for (const ad::Var& z : latent_draws) {
    ad::Var quad = ad::row_sum(ad::mul(z, z));              // z^T z
    ad::Var term = ad::log1p(ad::divide(quad, nu));
    mc_sum = mc_sum.valid() ? ad::add(mc_sum, term) : term;
  }
  ad::Var mc_mean = ad::scale(mc_sum, 1.0 / static_cast<double>(latent_draws.size()));

  ad::Var half_sum = ad::scale(ad::add_scalar(nu, p), 0.5);  // (nu+p)/2
  ad::Var per_datum = ad::sub(ad::mul(half_sum, mc_mean),
                              ad::add(log_sigma_sum, closed));
  return ad::mean_all(per_datum);
}

ad::Var kl_student_t(ad::Graph& graph, const TDistParams& params,
                     std::size_t mc_samples, RngState& rng) {
  params.validate();
  if (mc_samples < 1) {
    throw std::invalid_argument("kl_student_t: mc_samples must be >= 1");
  }
  const std::size_t p = params.dim();
  Matrix mu_m(1, p), sigma_m(1, p), nu_m(1, 1);
  for (std::size_t i = 0; i < p; ++i) {
    mu_m(0, i) = params.mu[i];
    sigma_m(0, i) = params.sigma[i];
  }
  nu_m(0, 0) = params.nu;
  ad::Var mu = graph.leaf(std::move(mu_m));
  ad::Var sigma = graph.leaf(std::move(sigma_m));
  ad::Var nu = graph.leaf(std::move(nu_m));
  NoiseSession noise(rng);
  std::vector<ad::Var> draws;
  draws.reserve(mc_samples);
  for (std::size_t k = 0; k < mc_samples; ++k) {
    draws.push_back(sample_student_t_latent(mu, sigma, nu, noise));
  }
  return kl_student_t_node(mu, sigma, nu, draws);
}

McEstimate kl_student_t_estimate(const TDistParams& params,
                                 std::size_t mc_samples, RngState& rng) {
  params.validate();
  if (mc_samples < 1) {
    throw std::invalid_argument("kl_student_t_estimate: mc_samples must be >= 1");
  }
  const double p = static_cast<double>(params.dim());
  const double half_sum = 0.5 * (params.nu + p);
  double closed = -half_sum * (digamma(half_sum) - digamma(0.5 * params.nu));
  for (double s : params.sigma) closed -= std::log(s);

  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < mc_samples; ++k) {
    const std::vector<double> z = sample_student_t(params, rng);
    double quad = 0.0;
    for (double zi : z) quad += zi * zi;
    const double value = half_sum * std::log1p(quad / params.nu);
    const double delta = value - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (value - mean);
  }
  const double variance =
      mc_samples > 1 ? m2 / static_cast<double>(mc_samples - 1) : 0.0;
  const double se = std::sqrt(variance / static_cast<double>(mc_samples));
  return {closed + mean, se};
}

ad::Var bce_reconstruction(ad::Var logits, const Matrix& targets,
                           const BoolMatrix* mask) {
  if (!logits.value().same_shape(targets)) {
    throw std::invalid_argument("bce_reconstruction: logits " +
                                logits.value().shape_string() + " vs targets " +
                                targets.shape_string());
  }
  if (mask != nullptr &&
      (mask->rows() != targets.rows() || mask->cols() != targets.cols())) {
    throw std::invalid_argument("bce_reconstruction: mask shape mismatch");
  }
  for (double x : targets.span()) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::domain_error("bce_reconstruction: targets must lie in [0,1], got " +
                              std::to_string(x));
    }
  }
  const std::size_t batch = targets.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (mask != nullptr && (*mask)[i]) continue;
    const double l = logits.value()[i];
    const double x = targets[i];
    acc += std::max(l, 0.0) - l * x + std::log1p(std::exp(-std::fabs(l)));
  }
  Matrix value(1, 1);
  value(0, 0) = acc * inv_batch;

  ad::Graph& graph = logits.graph();
  ad::Node* logits_n = logits.node();
  // The node keeps its own copies so callers may drop theirs.
  Matrix targets_copy = targets;
  BoolMatrix mask_copy = mask != nullptr ? *mask : BoolMatrix();
  const bool masked = mask != nullptr;
  ad::Var out = graph.make(std::move(value), {logits_n}, nullptr);
  ad::Node* self = out.node();
  self->backward = [self, logits_n, inv_batch, masked,
                    targets = std::move(targets_copy),
                    mask = std::move(mask_copy)]() {
    const double g = self->grad(0, 0) * inv_batch;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (masked && mask[i]) continue;
      logits_n->grad[i] += g * (ad::sigmoid(logits_n->value[i]) - targets[i]);
    }
  };
  return out;
}

ElboNodes assemble_elbo(ad::Var recon, ad::Var kl, double kl_weight) {
  ad::Var total = ad::add(recon, ad::scale(kl, kl_weight));
  return {recon, kl, total, kl_weight};
}

}  // namespace tvae
