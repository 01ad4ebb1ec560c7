#include "tvae/distributions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tvae/special_functions.hpp"

namespace tvae {

namespace {
constexpr double kPi = 3.14159265358979323846264338328;
constexpr double kGradClamp = 1e6;
}  // namespace

void TDistParams::validate(double nu_min) const {
  if (mu.empty() || mu.size() != sigma.size()) {
    throw std::invalid_argument("TDistParams: mu/sigma sizes " +
                                std::to_string(mu.size()) + " vs " +
                                std::to_string(sigma.size()));
  }
  for (double s : sigma) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("TDistParams: sigma must be strictly positive");
    }
  }
  if (!(nu > nu_min)) {
    throw std::invalid_argument("TDistParams: nu " + std::to_string(nu) +
                                " must exceed nu_min " + std::to_string(nu_min));
  }
}

std::vector<double> sample_standard_normal(RngState& rng, std::size_t n) {
  return rng.normal_vector(n);
}

GammaSample sample_gamma(RngState& rng, double alpha) {
  if (!(alpha > 0.0)) {
    throw std::domain_error("sample_gamma: alpha must be > 0, got " +
                            std::to_string(alpha));
  }
  if (alpha < 1.0) {
    const GammaSample boosted = sample_gamma(rng, alpha + 1.0);
    const double u = rng.uniform();
    return {boosted.z * std::pow(u, 1.0 / alpha), alpha};
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return {d * v, alpha};
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return {d * v, alpha};
  }
}

GammaGrad gamma_implicit_grad(const GammaSample& sample) {
  if (!(sample.z > 0.0)) {
    throw std::domain_error("gamma_implicit_grad: z must be > 0");
  }
  const GammaCdfEval cdf = gamma_cdf(sample.z, sample.alpha);
  if (!(cdf.d_dx > 0.0)) {
    return {kGradClamp, true};
  }
  const double raw = -cdf.d_dalpha / cdf.d_dx;
  if (!std::isfinite(raw) || raw > kGradClamp) return {kGradClamp, true};
  if (raw < -kGradClamp) return {-kGradClamp, true};
  return {raw, false};
}

double student_t_logpdf(std::span<const double> z, const TDistParams& params) {
  params.validate();
  if (z.size() != params.dim()) {
    throw std::invalid_argument("student_t_logpdf: z has dim " +
                                std::to_string(z.size()) + ", params have " +
                                std::to_string(params.dim()));
  }
  const double p = static_cast<double>(params.dim());
  double log_det = 0.0;
  double mahalanobis = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = (z[i] - params.mu[i]) / params.sigma[i];
    mahalanobis += d * d;
    log_det += std::log(params.sigma[i]);
  }
  const double half_sum = 0.5 * (params.nu + p);
  return log_gamma(half_sum) - log_gamma(0.5 * params.nu) -
         0.5 * p * std::log(kPi * params.nu) - log_det -
         half_sum * std::log1p(mahalanobis / params.nu);
}

std::vector<double> sample_student_t(const TDistParams& params, RngState& rng) {
  params.validate();
  const std::size_t p = params.dim();
  std::vector<double> x = rng.normal_vector(p);
  const double g = 2.0 * sample_gamma(rng, 0.5 * params.nu).z;
  const double scale = std::sqrt(params.nu / g);
  std::vector<double> z(p);
  for (std::size_t i = 0; i < p; ++i) {
    z[i] = params.mu[i] + params.sigma[i] * x[i] * scale;
  }
  return z;
}

void NoiseSession::start_replay() {
  if (mode_ != Mode::kRecord && mode_ != Mode::kReplay) {
    throw std::logic_error("NoiseSession: nothing recorded to replay");
  }
  mode_ = Mode::kReplay;
  rewind();
}

void NoiseSession::rewind() {
  normal_cursor_ = 0;
  gamma_cursor_ = 0;
}

Matrix NoiseSession::next_normals(std::size_t rows, std::size_t cols) {
  if (mode_ == Mode::kReplay) {
    if (normal_cursor_ >= normals_.size()) {
      throw std::logic_error("NoiseSession: replay ran past recorded normals");
    }
    const Matrix& m = normals_[normal_cursor_++];
    if (m.rows() != rows || m.cols() != cols) {
      throw std::logic_error("NoiseSession: replay shape mismatch " +
                             m.shape_string());
    }
    return m;
  }
  Matrix m(rows, cols);
  for (double& x : m.span()) x = rng_->normal();
  if (mode_ == Mode::kRecord) normals_.push_back(m);
  return m;
}

std::vector<double> NoiseSession::next_gammas(std::span<const double> alphas) {
  if (mode_ == Mode::kReplay) {
    if (gamma_cursor_ >= gamma_us_.size()) {
      throw std::logic_error("NoiseSession: replay ran past recorded gammas");
    }
    const std::vector<double>& us = gamma_us_[gamma_cursor_++];
    if (us.size() != alphas.size()) {
      throw std::logic_error("NoiseSession: replay gamma count mismatch");
    }
    std::vector<double> draws(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      draws[i] = gamma_quantile(us[i], alphas[i]);
    }
    return draws;
  }
  std::vector<double> draws(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    draws[i] = sample_gamma(*rng_, alphas[i]).z;
  }
  if (mode_ == Mode::kRecord) {
    std::vector<double> us(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      us[i] = gamma_cdf(draws[i], alphas[i]).value;
    }
    gamma_us_.push_back(std::move(us));
  }
  return draws;
}

ad::Var sample_student_t_latent(ad::Var mu, ad::Var sigma, ad::Var nu,
                                NoiseSession& noise) {
  if (!mu.value().same_shape(sigma.value())) {
    throw std::invalid_argument("sample_student_t_latent: mu " +
                                mu.value().shape_string() + " vs sigma " +
                                sigma.value().shape_string());
  }
  const std::size_t batch = mu.rows();
  const std::size_t p = mu.cols();
  if (nu.rows() != batch || nu.cols() != 1) {
    throw std::invalid_argument("sample_student_t_latent: nu must be " +
                                std::to_string(batch) + "x1, got " +
                                nu.value().shape_string());
  }

  const Matrix x = noise.next_normals(batch, p);
  std::vector<double> alphas(batch);
  for (std::size_t b = 0; b < batch; ++b) alphas[b] = 0.5 * nu.value()(b, 0);
  const std::vector<double> gammas = noise.next_gammas(alphas);

  Matrix t(batch, p);
  Matrix value(batch, p);
  for (std::size_t b = 0; b < batch; ++b) {
    const double nu_b = nu.value()(b, 0);
    const double g = 2.0 * gammas[b];
    const double inv_s = std::sqrt(nu_b / g);
    for (std::size_t i = 0; i < p; ++i) {
      t(b, i) = x(b, i) * inv_s;
      value(b, i) = mu.value()(b, i) + sigma.value()(b, i) * t(b, i);
    }
  }

  ad::Graph& graph = mu.graph();
  ad::Node* mu_n = mu.node();
  ad::Node* sigma_n = sigma.node();
  ad::Node* nu_n = nu.node();
  ad::Var out = graph.make(std::move(value), {mu_n, sigma_n, nu_n}, nullptr);
  ad::Node* self = out.node();
  self->backward = [self, mu_n, sigma_n, nu_n, t = std::move(t),
                    gammas = std::move(gammas)]() {
    const std::size_t batch = self->grad.rows();
    const std::size_t p = self->grad.cols();
    for (std::size_t b = 0; b < batch; ++b) {
      const double nu_b = nu_n->value(b, 0);
      const double gamma_b = gammas[b];
      const double g = 2.0 * gamma_b;
      // dg/dnu: g = 2*Gamma(nu/2) and dalpha/dnu = 1/2 cancel.
      const double dg_dnu =
          gamma_implicit_grad({gamma_b, 0.5 * nu_b}).dz_dalpha;
      // t = x / sqrt(g/nu)  =>  dt/dnu = -t * (nu*g' - g) / (2*g*nu)
      const double nu_factor = -(nu_b * dg_dnu - g) / (2.0 * g * nu_b);
      double nu_grad = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        const double go = self->grad(b, i);
        mu_n->grad(b, i) += go;
        sigma_n->grad(b, i) += go * t(b, i);
        nu_grad += go * sigma_n->value(b, i) * t(b, i) * nu_factor;
      }
      nu_n->grad(b, 0) += nu_grad;
    }
  };
  return out;
}

ad::Var sample_gaussian_latent(ad::Var mu, ad::Var log_var, NoiseSession& noise) {
  if (!mu.value().same_shape(log_var.value())) {
    throw std::invalid_argument("sample_gaussian_latent: mu " +
                                mu.value().shape_string() + " vs log_var " +
                                log_var.value().shape_string());
  }
  const std::size_t batch = mu.rows();
  const std::size_t p = mu.cols();
  const Matrix x = noise.next_normals(batch, p);

  Matrix deviation(batch, p);  // exp(log_var/2) * eps
  Matrix value(batch, p);
  for (std::size_t i = 0; i < value.size(); ++i) {
    deviation[i] = std::exp(0.5 * log_var.value()[i]) * x[i];
    value[i] = mu.value()[i] + deviation[i];
  }

  ad::Graph& graph = mu.graph();
  ad::Node* mu_n = mu.node();
  ad::Node* lv_n = log_var.node();
  ad::Var out = graph.make(std::move(value), {mu_n, lv_n}, nullptr);
  ad::Node* self = out.node();
  self->backward = [self, mu_n, lv_n, deviation = std::move(deviation)]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      mu_n->grad[i] += self->grad[i];
      lv_n->grad[i] += self->grad[i] * 0.5 * deviation[i];
    }
  };
  return out;
}

}  // namespace tvae
