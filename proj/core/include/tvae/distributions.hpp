#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvae/autodiff.hpp"
#include "tvae/matrix.hpp"
#include "tvae/rng.hpp"

namespace tvae {

/// Variational posterior parameters for one datum: location vector, strictly
/// positive diagonal scale vector, and a single scalar degrees-of-freedom.
struct TDistParams {
  std::vector<double> mu;
  std::vector<double> sigma;
  double nu = 1.0;

  std::size_t dim() const { return mu.size(); }
  void validate(double nu_min = 0.0) const;
};

struct GammaSample {
  double z;      // draw from Gamma(alpha, rate 1)
  double alpha;
};

struct GammaGrad {
  double dz_dalpha;
  bool clamped;  // set when the CDF slope underflowed in the far tail
};

std::vector<double> sample_standard_normal(RngState& rng, std::size_t n);

/// Marsaglia-Tsang squeeze method for alpha >= 1; for alpha < 1 the draw is
/// boosted from alpha + 1 by z * u^(1/alpha).
GammaSample sample_gamma(RngState& rng, double alpha);

/// Pathwise derivative dz/dalpha = -(dF/dalpha) / (dF/dz) at the sampled
/// point, holding the underlying uniform fixed. |dz/dalpha| is clamped at
/// 1e6 when the density underflows in the extreme tail.
GammaGrad gamma_implicit_grad(const GammaSample& sample);

/// Log density of the location-shifted p-variate Student-t with diagonal
/// scale and a single degrees-of-freedom parameter.
double student_t_logpdf(std::span<const double> z, const TDistParams& params);

/// Graph-free draw from St(mu, sigma, nu): x ~ N(0,I), g ~ chi^2(nu) via
/// 2*Gamma(nu/2, rate 1), t = x / sqrt(g/nu), z = mu + sigma * t.
std::vector<double> sample_student_t(const TDistParams& params, RngState& rng);

/// Noise feed for the stochastic graph nodes. kFresh draws and forgets;
/// kRecord draws and stores the parameter-free representation (normals
/// verbatim, gamma draws as their CDF value u); kReplay pushes the stored u
/// back through the quantile at the *current* shape, which is exactly the
/// function the implicit gradient differentiates. Record/replay is what
/// makes common-random-number finite differencing of a stochastic loss
/// possible.
class NoiseSession {
 public:
  enum class Mode { kFresh, kRecord, kReplay };

  explicit NoiseSession(RngState& rng, Mode mode = Mode::kFresh)
      : rng_(&rng), mode_(mode) {}

  /// Replay-only session over injected noise (testing hook for forcing
  /// specific draws through the stochastic nodes).
  NoiseSession(std::vector<Matrix> normals,
               std::vector<std::vector<double>> gamma_us)
      : rng_(nullptr),
        mode_(Mode::kReplay),
        normals_(std::move(normals)),
        gamma_us_(std::move(gamma_us)) {}

  Mode mode() const { return mode_; }

  /// Switch a recorded session to replay and rewind the cursors.
  void start_replay();
  void rewind();

  Matrix next_normals(std::size_t rows, std::size_t cols);

  /// One Gamma(alphas[i], rate 1) draw per entry.
  std::vector<double> next_gammas(std::span<const double> alphas);

 private:
  RngState* rng_;
  Mode mode_;
  std::vector<Matrix> normals_;
  std::vector<std::vector<double>> gamma_us_;
  std::size_t normal_cursor_ = 0;
  std::size_t gamma_cursor_ = 0;
};

/// Reparameterized draw from the batched posterior St(mu_b, sigma_b, nu_b).
/// mu, sigma are [B x p]; nu is [B x 1]. The backward rule routes gradients
/// to mu and sigma directly and to nu through both the explicit 1/sqrt(g/nu)
/// factor and the implicit dg/dnu of the gamma draw.
ad::Var sample_student_t_latent(ad::Var mu, ad::Var sigma, ad::Var nu,
                                NoiseSession& noise);

/// Reparameterized draw z = mu + exp(log_var/2) * eps for the Gaussian
/// baseline; mu, log_var are [B x p].
ad::Var sample_gaussian_latent(ad::Var mu, ad::Var log_var, NoiseSession& noise);

}  // namespace tvae
