#include "tvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tvae {

namespace {

Matrix uniform_init(std::size_t rows, std::size_t cols, double limit,
                    RngState& rng) {
  Matrix m(rows, cols);
  for (double& x : m.span()) x = (2.0 * rng.uniform() - 1.0) * limit;
  return m;
}

DenseLayer make_layer(std::size_t in, std::size_t out, ad::Activation act,
                      RngState& rng) {
  const double limit =
      act == ad::Activation::kRelu
          ? std::sqrt(6.0 / static_cast<double>(in))
          : std::sqrt(6.0 / static_cast<double>(in + out));
  return {uniform_init(in, out, limit, rng), Matrix(1, out)};
}

}  // namespace

VaeModel VaeModel::init(const TrainConfig& cfg, RngState& rng,
                        std::size_t input_dim) {
  cfg.validate();
  VaeModel model;
  model.cfg_ = cfg;
  model.input_dim_ = input_dim;
  model.trunk_count_ = cfg.encoder_layers.size() - 1;
  model.head_count_ = cfg.prior == PriorKind::kStudentT ? 3 : 2;

  const std::size_t p = static_cast<std::size_t>(cfg.latent_dim());
  std::size_t feat = input_dim;
  for (std::size_t i = 0; i < model.trunk_count_; ++i) {
    const std::size_t next = static_cast<std::size_t>(cfg.encoder_layers[i]);
    model.layers_.push_back(make_layer(feat, next, cfg.activation, rng));
    feat = next;
  }
  model.layers_.push_back(make_layer(feat, p, cfg.activation, rng));  // mu
  model.layers_.push_back(make_layer(feat, p, cfg.activation, rng));  // raw scale
  if (cfg.prior == PriorKind::kStudentT) {
    model.layers_.push_back(make_layer(feat, 1, cfg.activation, rng));  // raw nu
  }
  std::size_t d = p;
  for (std::size_t i = 1; i < cfg.decoder_layers.size(); ++i) {
    const std::size_t next = static_cast<std::size_t>(cfg.decoder_layers[i]);
    model.layers_.push_back(make_layer(d, next, cfg.activation, rng));
    d = next;
  }
  model.layers_.push_back(make_layer(d, input_dim, cfg.activation, rng));
  return model;
}

VaeModel VaeModel::from_layers(const TrainConfig& cfg,
                               std::vector<DenseLayer> layers) {
  cfg.validate();
  VaeModel model;
  model.cfg_ = cfg;
  model.trunk_count_ = cfg.encoder_layers.size() - 1;
  model.head_count_ = cfg.prior == PriorKind::kStudentT ? 3 : 2;
  const std::size_t expected =
      model.trunk_count_ + model.head_count_ + cfg.decoder_layers.size();
  if (layers.size() != expected) {
    throw std::invalid_argument("VaeModel: config expects " +
                                std::to_string(expected) + " layers, got " +
                                std::to_string(layers.size()));
  }
  model.input_dim_ = layers.front().weight.rows();
  model.layers_ = std::move(layers);
  return model;
}

std::vector<ad::Var> VaeModel::make_param_leaves(ad::Graph& graph) const {
  std::vector<ad::Var> params;
  params.reserve(layers_.size() * 2);
  for (const DenseLayer& layer : layers_) {
    params.push_back(graph.leaf(layer.weight));
    params.push_back(graph.leaf(layer.bias));
  }
  return params;
}

VaeModel::Heads VaeModel::encode(ad::Graph& graph, ad::Var x,
                                 std::span<const ad::Var> param_vars) const {
  ad::Var h = x;
  for (std::size_t i = 0; i < trunk_count_; ++i) {
    h = ad::activation(ad::affine(h, param_vars[2 * i], param_vars[2 * i + 1]),
                       cfg_.activation);
  }
  const std::size_t head0 = trunk_count_;
  Heads heads;
  heads.mu = ad::affine(h, param_vars[2 * head0], param_vars[2 * head0 + 1]);
  heads.raw_scale =
      ad::affine(h, param_vars[2 * (head0 + 1)], param_vars[2 * (head0 + 1) + 1]);
  if (cfg_.prior == PriorKind::kStudentT) {
    heads.raw_nu =
        ad::affine(h, param_vars[2 * (head0 + 2)], param_vars[2 * (head0 + 2) + 1]);
  }
  (void)graph;
  return heads;
}

ad::Var VaeModel::decode(ad::Graph& graph, ad::Var z,
                         std::span<const ad::Var> param_vars) const {
  const std::size_t dec0 = trunk_count_ + head_count_;
  const std::size_t dec_layers = layers_.size() - dec0;
  ad::Var h = z;
  for (std::size_t i = 0; i < dec_layers; ++i) {
    const std::size_t li = dec0 + i;
    h = ad::affine(h, param_vars[2 * li], param_vars[2 * li + 1]);
    if (i + 1 < dec_layers) h = ad::activation(h, cfg_.activation);
  }
  (void)graph;
  return h;  // logits
}

VaeModel::LossBuild VaeModel::build_loss(ad::Graph& graph, const Matrix& x_input,
                                         const Matrix& x_target,
                                         const BoolMatrix* loss_mask,
                                         NoiseSession& noise) const {
  if (x_input.cols() != input_dim_) {
    throw std::invalid_argument("build_loss: input has " +
                                std::to_string(x_input.cols()) +
                                " columns, model expects " +
                                std::to_string(input_dim_));
  }
  std::vector<ad::Var> params = make_param_leaves(graph);
  ad::Var x = graph.leaf(x_input);
  const Heads heads = encode(graph, x, params);

  ad::Var latent;
  ad::Var kl;
  if (cfg_.prior == PriorKind::kStudentT) {
    ad::Var sigma = ad::exp(heads.raw_scale);
    ad::Var nu = ad::add_scalar(
        ad::activation(heads.raw_nu, ad::Activation::kSoftplus), cfg_.nu_min);
    const std::size_t k = static_cast<std::size_t>(cfg_.kl_mc_samples);
    std::vector<ad::Var> draws;
    draws.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      draws.push_back(sample_student_t_latent(heads.mu, sigma, nu, noise));
    }
    latent = draws.front();  // the reconstruction path shares the first draw
    kl = kl_student_t_node(heads.mu, sigma, nu, draws);
  } else {
    latent = sample_gaussian_latent(heads.mu, heads.raw_scale, noise);
    kl = kl_gaussian_node(heads.mu, heads.raw_scale);
  }

  ad::Var logits = decode(graph, latent, params);
  ad::Var recon = bce_reconstruction(logits, x_target, loss_mask);
  return {assemble_elbo(recon, kl, cfg_.kl_weight), std::move(params)};
}

Matrix VaeModel::reconstruct(const Matrix& x, RngState& rng) const {
  ad::Graph graph;
  NoiseSession noise(rng);
  std::vector<ad::Var> params = make_param_leaves(graph);
  ad::Var input = graph.leaf(x);
  const Heads heads = encode(graph, input, params);
  ad::Var latent;
  if (cfg_.prior == PriorKind::kStudentT) {
    ad::Var sigma = ad::exp(heads.raw_scale);
    ad::Var nu = ad::add_scalar(
        ad::activation(heads.raw_nu, ad::Activation::kSoftplus), cfg_.nu_min);
    latent = sample_student_t_latent(heads.mu, sigma, nu, noise);
  } else {
    latent = sample_gaussian_latent(heads.mu, heads.raw_scale, noise);
  }
  ad::Var probs = ad::activation(decode(graph, latent, params),
                                 ad::Activation::kSigmoid);
  return probs.value();
}

Matrix VaeModel::decode_latent(const Matrix& z) const {
  ad::Graph graph;
  std::vector<ad::Var> params = make_param_leaves(graph);
  ad::Var latent = graph.leaf(z);
  ad::Var probs = ad::activation(decode(graph, latent, params),
                                 ad::Activation::kSigmoid);
  return probs.value();
}

std::vector<Matrix*> VaeModel::parameters() {
  std::vector<Matrix*> out;
  out.reserve(layers_.size() * 2);
  for (DenseLayer& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Matrix*> VaeModel::parameters() const {
  std::vector<const Matrix*> out;
  out.reserve(layers_.size() * 2);
  for (const DenseLayer& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<double> VaeModel::flatten_parameters() const {
  std::vector<double> flat;
  for (const Matrix* m : parameters()) {
    flat.insert(flat.end(), m->span().begin(), m->span().end());
  }
  return flat;
}

void VaeModel::set_parameters(std::span<const double> flat) {
  std::size_t offset = 0;
  for (Matrix* m : parameters()) {
    if (offset + m->size() > flat.size()) {
      throw std::invalid_argument("set_parameters: flat vector too short");
    }
    std::copy(flat.begin() + offset, flat.begin() + offset + m->size(),
              m->span().begin());
    offset += m->size();
  }
  if (offset != flat.size()) {
    throw std::invalid_argument("set_parameters: flat vector has " +
                                std::to_string(flat.size()) + " entries, model has " +
                                std::to_string(offset));
  }
}

}  // namespace tvae
