// Copyright 2026  The pairsamp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pairsamp/align.hpp"
#include "pairsamp/corpus.hpp"
#include "pairsamp/features.hpp"
#include "pairsamp/sampler.hpp"
#include "pairsamp/types.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace pairsamp {

struct NetConfig {
  std::vector<int> layer_dims{280, 500, 500, 100};
  double margin = 0.5;
  bool batchnorm = true;  // hidden layers only
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

void validate(const NetConfig& cfg);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_frames = 500;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

template <typename Scalar>
struct Layer {
  RowMatrix<Scalar> weight;  // fan_in x fan_out
  RowVec<Scalar> bias;
  // Batchnorm; empty on the embedding layer.
  RowVec<Scalar> bn_scale;
  RowVec<Scalar> bn_shift;
  RowVec<Scalar> running_mean;
  RowVec<Scalar> running_var;

  bool has_batchnorm() const { return bn_scale.size() > 0; }
};

template <typename Scalar>
struct NetworkParams {
  NetConfig config;
  std::vector<Layer<Scalar>> layers;

  template <typename Other>
  NetworkParams<Other> cast() const {
    NetworkParams<Other> out;
    out.config = config;
    for (const auto& l : layers) {
      Layer<Other> o;
      o.weight = l.weight.template cast<Other>();
      o.bias = l.bias.template cast<Other>();
      o.bn_scale = l.bn_scale.template cast<Other>();
      o.bn_shift = l.bn_shift.template cast<Other>();
      o.running_mean = l.running_mean.template cast<Other>();
      o.running_var = l.running_var.template cast<Other>();
      out.layers.push_back(std::move(o));
    }
    return out;
  }
};

// Same shapes as the trainable part of NetworkParams.
template <typename Scalar>
struct LayerGrad {
  RowMatrix<Scalar> weight;
  RowVec<Scalar> bias;
  RowVec<Scalar> bn_scale;
  RowVec<Scalar> bn_shift;
};

template <typename Scalar>
using Gradients = std::vector<LayerGrad<Scalar>>;

template <typename Scalar>
Gradients<Scalar> zero_gradients(const NetworkParams<Scalar>& params) {
  Gradients<Scalar> g(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    g[l].weight = RowMatrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols());
    g[l].bias = RowVec<Scalar>::Zero(layer.bias.size());
    g[l].bn_scale = RowVec<Scalar>::Zero(layer.bn_scale.size());
    g[l].bn_shift = RowVec<Scalar>::Zero(layer.bn_shift.size());
  }
  return g;
}

// Glorot-uniform weights, zero biases, unit batchnorm scale.
NetworkParams<double> init_network(const NetConfig& cfg, std::uint64_t seed);

enum class Mode { train, infer };

// Intermediate values of one forward pass, kept for the backward pass.
template <typename Scalar>
struct ForwardCache {
  std::vector<RowMatrix<Scalar>> inputs;     // input to each layer
  std::vector<RowMatrix<Scalar>> normalized; // batchnorm x-hat per hidden layer
  std::vector<RowVec<Scalar>> inv_std;
  std::vector<RowVec<Scalar>> batch_mean;
  std::vector<RowVec<Scalar>> batch_var;     // biased
  RowMatrix<Scalar> output;
};

template <typename Scalar>
RowMatrix<Scalar> sigmoid(const RowMatrix<Scalar>& u) {
  return (Scalar(1) + (-u.array()).exp()).inverse().matrix();
}

// Affine -> batchnorm -> sigmoid per hidden layer, affine only for the
// last. Train mode normalizes with batch statistics and does not touch the
// running statistics (see update_running_stats).
template <typename Scalar>
ForwardCache<Scalar> forward_cached(const NetworkParams<Scalar>& params,
                                    const RowMatrix<Scalar>& x, Mode mode) {
  if (x.cols() != params.config.layer_dims.front())
    throw InputError("forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(params.config.layer_dims.front()));
  if (mode == Mode::train && x.rows() < 2)
    throw InputError("forward: train mode needs at least 2 rows");
  if (!x.allFinite()) throw InputError("forward: non-finite input");

  ForwardCache<Scalar> cache;
  RowMatrix<Scalar> h = x;
  const Scalar eps = static_cast<Scalar>(params.config.bn_eps);
  const auto m = static_cast<Scalar>(x.rows());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    cache.inputs.push_back(h);
    RowMatrix<Scalar> z = h * layer.weight;
    z.rowwise() += layer.bias;
    if (l + 1 == params.layers.size()) {
      cache.output = std::move(z);
      break;
    }
    if (layer.has_batchnorm()) {
      RowVec<Scalar> mean, var;
      if (mode == Mode::train) {
        mean = z.colwise().sum() / m;
        var = (z.rowwise() - mean).array().square().colwise().sum().matrix() / m;
      } else {
        mean = layer.running_mean;
        var = layer.running_var;
      }
      RowVec<Scalar> inv_std = (var.array() + eps).rsqrt().matrix();
      RowMatrix<Scalar> xhat =
          ((z.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
      z = (xhat.array().rowwise() * layer.bn_scale.array()).matrix();
      z.rowwise() += layer.bn_shift;
      cache.normalized.push_back(std::move(xhat));
      cache.inv_std.push_back(std::move(inv_std));
      cache.batch_mean.push_back(std::move(mean));
      cache.batch_var.push_back(std::move(var));
    }
    h = sigmoid<Scalar>(z);
  }
  return cache;
}

template <typename Scalar>
RowMatrix<Scalar> forward(const NetworkParams<Scalar>& params, const RowMatrix<Scalar>& x,
                          Mode mode) {
  return forward_cached(params, x, mode).output;
}

// Exponential moving average of the batch statistics of a train-mode pass;
// the variance is stored unbiased.
template <typename Scalar>
void update_running_stats(NetworkParams<Scalar>& params, const ForwardCache<Scalar>& cache) {
  const Scalar momentum = static_cast<Scalar>(params.config.bn_momentum);
  const auto m = static_cast<Scalar>(cache.output.rows());
  std::size_t k = 0;
  for (auto& layer : params.layers) {
    if (!layer.has_batchnorm()) continue;
    layer.running_mean = (Scalar(1) - momentum) * layer.running_mean + momentum * cache.batch_mean[k];
    layer.running_var = (Scalar(1) - momentum) * layer.running_var +
                        momentum * cache.batch_var[k] * (m / (m - Scalar(1)));
    ++k;
  }
}

// Per-row loss terms and their derivative w.r.t. the cosine.
template <typename Scalar>
struct CosineTerms {
  RowVec<Scalar> cos;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norm1, norm2;
};

template <typename Scalar>
CosineTerms<Scalar> row_cosines(const RowMatrix<Scalar>& e1, const RowMatrix<Scalar>& e2) {
  CosineTerms<Scalar> t;
  t.norm1 = e1.rowwise().norm();
  t.norm2 = e2.rowwise().norm();
  t.cos.resize(e1.rows());
  for (Eigen::Index i = 0; i < e1.rows(); ++i) {
    if (t.norm1(i) == Scalar(0) || t.norm2(i) == Scalar(0))
      throw InputError("margin_cosine_loss: zero-norm embedding row " + std::to_string(i));
    t.cos(i) = e1.row(i).dot(e2.row(i)) / (t.norm1(i) * t.norm2(i));
  }
  return t;
}

// Mean over rows of -cos for y = +1 and max(0, cos - margin) for y = -1.
template <typename Scalar>
Scalar margin_cosine_loss(const RowMatrix<Scalar>& e1, const RowMatrix<Scalar>& e2,
                          const Vector& y, double margin) {
  if (e1.rows() != e2.rows() || e1.cols() != e2.cols() || e1.rows() != y.size())
    throw InputError("margin_cosine_loss: shape mismatch");
  if (e1.rows() == 0) return Scalar(0);
  const auto terms = row_cosines(e1, e2);
  const Scalar gamma = static_cast<Scalar>(margin);
  Scalar total(0);
  for (Eigen::Index i = 0; i < e1.rows(); ++i) {
    const Scalar c = terms.cos(i);
    total += y(i) > 0 ? -c : std::max(Scalar(0), c - gamma);
  }
  return total / static_cast<Scalar>(e1.rows());
}

// Back-propagates d loss / d output through one branch, accumulating into
// grads.
template <typename Scalar>
void backward_branch(const NetworkParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                     RowMatrix<Scalar> d_out, Gradients<Scalar>& grads) {
  const auto m = static_cast<Scalar>(d_out.rows());
  std::size_t bn_index = cache.normalized.size();
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = grads[l];
    RowMatrix<Scalar> dz = std::move(d_out);
    if (l + 1 != params.layers.size()) {
      // d_out holds d loss / d h for this layer's sigmoid output, which is
      // the next layer's input.
      const auto& h = cache.inputs[l + 1];
      RowMatrix<Scalar> du = (dz.array() * h.array() * (Scalar(1) - h.array())).matrix();
      if (layer.has_batchnorm()) {
        --bn_index;
        const auto& xhat = cache.normalized[bn_index];
        const auto& inv_std = cache.inv_std[bn_index];
        g.bn_scale += (du.array() * xhat.array()).colwise().sum().matrix();
        g.bn_shift += du.colwise().sum();
        RowMatrix<Scalar> dxhat = (du.array().rowwise() * layer.bn_scale.array()).matrix();
        const RowVec<Scalar> sum_dxhat = dxhat.colwise().sum();
        const RowVec<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum().matrix();
        RowMatrix<Scalar> centered = (m * dxhat.array()).matrix();
        centered.rowwise() -= sum_dxhat;
        centered -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
        dz = ((centered.array().rowwise() * inv_std.array()) / m).matrix();
      } else {
        dz = std::move(du);
      }
    }
    g.weight.noalias() += cache.inputs[l].transpose() * dz;
    g.bias += dz.colwise().sum();
    if (l > 0) d_out = dz * layer.weight.transpose();
  }
}

// Exact gradient of the mean margin cosine loss over the batch; the two
// branches run as separate train-mode passes (separate batch statistics)
// and accumulate into one shared gradient.
template <typename Scalar>
Scalar loss_and_gradients(const NetworkParams<Scalar>& params, const RowMatrix<Scalar>& x1,
                          const RowMatrix<Scalar>& x2, const Vector& y, Gradients<Scalar>& grads,
                          ForwardCache<Scalar>* cache1_out = nullptr,
                          ForwardCache<Scalar>* cache2_out = nullptr) {
  auto c1 = forward_cached(params, x1, Mode::train);
  auto c2 = forward_cached(params, x2, Mode::train);
  const auto& e1 = c1.output;
  const auto& e2 = c2.output;
  const Scalar loss = margin_cosine_loss<Scalar>(e1, e2, y, params.config.margin);
  const auto terms = row_cosines(e1, e2);
  const Scalar gamma = static_cast<Scalar>(params.config.margin);
  const auto m = static_cast<Scalar>(e1.rows());

  RowMatrix<Scalar> d1(e1.rows(), e1.cols()), d2(e2.rows(), e2.cols());
  for (Eigen::Index i = 0; i < e1.rows(); ++i) {
    const Scalar c = terms.cos(i);
    Scalar dl_dc(0);
    if (y(i) > 0)
      dl_dc = Scalar(-1) / m;
    else if (c > gamma)
      dl_dc = Scalar(1) / m;
    const Scalar n1 = terms.norm1(i), n2 = terms.norm2(i);
    d1.row(i) = dl_dc * (e2.row(i) / (n1 * n2) - c * e1.row(i) / (n1 * n1));
    d2.row(i) = dl_dc * (e1.row(i) / (n1 * n2) - c * e2.row(i) / (n2 * n2));
  }
  Gradients<Scalar> g1 = zero_gradients(params);
  Gradients<Scalar> g2 = zero_gradients(params);
  backward_branch(params, c1, std::move(d1), g1);
  backward_branch(params, c2, std::move(d2), g2);
  for (std::size_t l = 0; l < grads.size(); ++l) {
    grads[l].weight += g1[l].weight + g2[l].weight;
    grads[l].bias += g1[l].bias + g2[l].bias;
    grads[l].bn_scale += g1[l].bn_scale + g2[l].bn_scale;
    grads[l].bn_shift += g1[l].bn_shift + g2[l].bn_shift;
  }
  if (!std::isfinite(static_cast<double>(loss))) throw std::runtime_error("non-finite loss");
  if (cache1_out != nullptr) *cache1_out = std::move(c1);
  if (cache2_out != nullptr) *cache2_out = std::move(c2);
  return loss;
}

template <typename Scalar>
Gradients<Scalar> backward(const NetworkParams<Scalar>& params, const FramePairBatch& batch) {
  Gradients<Scalar> grads = zero_gradients(params);
  loss_and_gradients<Scalar>(params, batch.x1.template cast<Scalar>(),
                             batch.x2.template cast<Scalar>(), batch.y, grads);
  return grads;
}

struct AdamState {
  Gradients<double> m;
  Gradients<double> v;
  long step = 0;
};

AdamState init_adam(const NetworkParams<double>& params);

// Bias-corrected Adam update at step index t (1-based).
void adam_step(NetworkParams<double>& params, const Gradients<double>& grads, AdamState& state,
               long t, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  long frame_pairs = 0;
};

struct TrainReport {
  double initial_valid_loss = 0.0;
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;
};

struct TrainResult {
  NetworkParams<double> params;
  TrainReport report;
};

// Frame pairs for the frozen validation set of a training run.
FramePairBatch validation_batch(const Corpus& valid_corpus, const FeatureArchive& raw,
                                const FeatureArchive& stacked, const SamplerConfig& sampler_cfg);

double evaluate_loss(const NetworkParams<double>& params, const FramePairBatch& batch);

TrainResult train(const Corpus& train_corpus, const Corpus& valid_corpus,
                  const FeatureArchive& raw, const FeatureArchive& stacked,
                  const SamplerConfig& sampler_cfg, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg);

FeatureArchive embed_archive(const NetworkParams<double>& params, const FeatureArchive& stacked);

void write_train_report(const TrainReport& report, const std::filesystem::path& path);
TrainReport read_train_report(const std::filesystem::path& path);

void save_model(const NetworkParams<double>& params, const std::filesystem::path& path);
NetworkParams<double> load_model(const std::filesystem::path& path);

}  // namespace pairsamp
