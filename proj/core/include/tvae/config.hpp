#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvae/autodiff.hpp"
#include "tvae/ising.hpp"

namespace tvae {

enum class PriorKind { kGaussian, kStudentT };

std::string to_string(PriorKind kind);
PriorKind prior_from_string(const std::string& name);

/// Full training recipe. Serializes to flat `key = value` text (lists as
/// comma-separated integers); unknown or duplicate keys are parse errors.
struct TrainConfig {
  PriorKind prior = PriorKind::kStudentT;
  std::vector<int> encoder_layers;  // hidden sizes..., latent dim p last
  std::vector<int> decoder_layers;  // latent dim p first, hidden sizes...
  ad::Activation activation = ad::Activation::kRelu;
  double lr = 1e-3;
  int batch_size = 128;
  int epochs = 20;
  std::uint64_t seed = 1;
  double val_fraction = 0.2;
  double nu_min = 0.5;
  int kl_mc_samples = 4;
  double kl_weight = 1.0;
  bool masking = false;
  IsingConfig ising;

  int latent_dim() const { return encoder_layers.back(); }
  void validate() const;
};

TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string to_text(const TrainConfig& cfg);

}  // namespace tvae
