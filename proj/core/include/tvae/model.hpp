#pragma once

#include <span>
#include <vector>

#include "tvae/autodiff.hpp"
#include "tvae/config.hpp"
#include "tvae/distributions.hpp"
#include "tvae/matrix.hpp"
#include "tvae/objectives.hpp"
#include "tvae/rng.hpp"

namespace tvae {

struct DenseLayer {
  Matrix weight;  // [in x out]
  Matrix bias;    // [1 x out]
};

/// MLP encoder/decoder pair with prior-specific heads. For the Student-t
/// prior the encoder ends in three linear heads (mu, raw scale, raw nu) off
/// a shared trunk; for the Gaussian baseline, two (mu, log-variance).
/// sigma = exp(raw scale); nu = nu_min + softplus(raw nu).
///
/// Layer order (fixed, also the checkpoint order): encoder trunk, mu head,
/// scale head, [nu head], decoder layers.
class VaeModel {
 public:
  /// Fresh weights: He-uniform for relu nets, Xavier-uniform otherwise,
  /// zero biases. input_dim is 784 for images; tests use smaller frames.
  static VaeModel init(const TrainConfig& cfg, RngState& rng,
                       std::size_t input_dim = 784);

  /// Rebuild from checkpointed weights.
  static VaeModel from_layers(const TrainConfig& cfg, std::vector<DenseLayer> layers);

  struct LossBuild {
    ElboNodes elbo;
    std::vector<ad::Var> params;  // leaf per parameter, parameter_count() entries
  };

  /// Builds the full stochastic loss graph for one batch. x_input feeds the
  /// encoder; x_target is the reconstruction target; loss_mask marks pixels
  /// excluded from the reconstruction term.
  LossBuild build_loss(ad::Graph& graph, const Matrix& x_input,
                       const Matrix& x_target, const BoolMatrix* loss_mask,
                       NoiseSession& noise) const;

  /// One reconstruction per row of x (single latent draw), sigmoid outputs.
  Matrix reconstruct(const Matrix& x, RngState& rng) const;

  /// Decoder alone: latent batch [n x p] -> sigmoid outputs [n x 784].
  Matrix decode_latent(const Matrix& z) const;

  const TrainConfig& config() const { return cfg_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Parameter tensors in checkpoint order: weight then bias per layer.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  std::vector<double> flatten_parameters() const;
  void set_parameters(std::span<const double> flat);

  std::size_t input_dim() const { return input_dim_; }

 private:
  VaeModel() = default;

  struct Heads {
    ad::Var mu;
    ad::Var raw_scale;
    ad::Var raw_nu;  // invalid for the Gaussian prior
  };
  Heads encode(ad::Graph& graph, ad::Var x,
               std::span<const ad::Var> param_vars) const;
  ad::Var decode(ad::Graph& graph, ad::Var z,
                 std::span<const ad::Var> param_vars) const;
  std::vector<ad::Var> make_param_leaves(ad::Graph& graph) const;

  TrainConfig cfg_;
  std::vector<DenseLayer> layers_;
  std::size_t trunk_count_ = 0;
  std::size_t head_count_ = 0;
  std::size_t input_dim_ = 784;
};

}  // namespace tvae
