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

#include "pairsamp/network.hpp"

#include "text_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <numeric>

namespace pairsamp {

void validate(const NetConfig& cfg) {
  if (cfg.layer_dims.size() < 3)
    throw InputError("network: layer_dims needs an input, at least one hidden and an output size");
  for (int d : cfg.layer_dims)
    if (d < 1) throw InputError("network: layer sizes must be >= 1");
  if (!(cfg.margin > 0.0 && cfg.margin < 1.0)) throw InputError("network: margin must be in (0, 1)");
  if (!(cfg.bn_momentum > 0.0 && cfg.bn_momentum <= 1.0))
    throw InputError("network: bn_momentum must be in (0, 1]");
  if (!(cfg.bn_eps > 0.0)) throw InputError("network: bn_eps must be > 0");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InputError("train: learning_rate must be > 0");
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0))
    throw InputError("train: adam_beta1 must be in (0, 1)");
  if (!(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0))
    throw InputError("train: adam_beta2 must be in (0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw InputError("train: adam_eps must be > 0");
  if (cfg.batch_frames < 2) throw InputError("train: batch_frames must be >= 2");
  if (cfg.max_epochs < 1) throw InputError("train: max_epochs must be >= 1");
  if (cfg.patience < 1) throw InputError("train: patience must be >= 1");
}

NetworkParams<double> init_network(const NetConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  NetworkParams<double> params;
  params.config = cfg;
  const std::size_t n_layers = cfg.layer_dims.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int fan_in = cfg.layer_dims[l];
    const int fan_out = cfg.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer<double> layer;
    layer.weight.resize(fan_in, fan_out);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    layer.bias = RowVec<double>::Zero(fan_out);
    if (cfg.batchnorm && l + 1 < n_layers) {
      layer.bn_scale = RowVec<double>::Ones(fan_out);
      layer.bn_shift = RowVec<double>::Zero(fan_out);
      layer.running_mean = RowVec<double>::Zero(fan_out);
      layer.running_var = RowVec<double>::Ones(fan_out);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

AdamState init_adam(const NetworkParams<double>& params) {
  return AdamState{zero_gradients(params), zero_gradients(params), 0};
}

namespace {

template <typename Derived, typename GradDerived, typename StateDerived>
void adam_update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<GradDerived>& grad,
                 Eigen::MatrixBase<StateDerived>& m, Eigen::MatrixBase<StateDerived>& v,
                 double lr_t, double step_eps, const TrainConfig& cfg) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseAbs2();
  param -= (lr_t * m.array() / (v.array().sqrt() + step_eps)).matrix();
}

}  // namespace

void adam_step(NetworkParams<double>& params, const Gradients<double>& grads, AdamState& state,
               long t, const TrainConfig& cfg) {
  if (t < 1) throw InputError("adam_step: step index must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  // p -= lr * (m / bc1) / (sqrt(v / bc2) + eps), folded into one step size
  const double lr_t = cfg.learning_rate * std::sqrt(bc2) / bc1;
  const double step_eps = cfg.adam_eps * std::sqrt(bc2);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads[l];
    adam_update(p.weight, g.weight, state.m[l].weight, state.v[l].weight, lr_t, step_eps, cfg);
    adam_update(p.bias, g.bias, state.m[l].bias, state.v[l].bias, lr_t, step_eps, cfg);
    if (p.has_batchnorm()) {
      adam_update(p.bn_scale, g.bn_scale, state.m[l].bn_scale, state.v[l].bn_scale, lr_t,
                  step_eps, cfg);
      adam_update(p.bn_shift, g.bn_shift, state.m[l].bn_shift, state.v[l].bn_shift, lr_t,
                  step_eps, cfg);
    }
  }
  state.step = t;
}

FramePairBatch validation_batch(const Corpus& valid_corpus, const FeatureArchive& raw,
                                const FeatureArchive& stacked, const SamplerConfig& sampler_cfg) {
  SamplerConfig cfg = sampler_cfg;
  cfg.pairs_per_epoch = std::max(1, sampler_cfg.pairs_per_epoch / 2);
  const PairSampler sampler(valid_corpus, cfg);
  Rng rng(derive_seed(cfg.seed, 0x76616c6964ULL));  // "valid"
  std::vector<TokenPair> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg.pairs_per_epoch));
  for (int i = 0; i < cfg.pairs_per_epoch; ++i) pairs.push_back(sampler.sample(rng));
  return realize_pairs(pairs, raw, stacked);
}

double evaluate_loss(const NetworkParams<double>& params, const FramePairBatch& batch) {
  constexpr Eigen::Index kChunk = 4096;
  double total = 0.0;
  for (Eigen::Index start = 0; start < batch.size(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, batch.size() - start);
    const Matrix e1 = forward<double>(params, batch.x1.middleRows(start, n), Mode::infer);
    const Matrix e2 = forward<double>(params, batch.x2.middleRows(start, n), Mode::infer);
    total += margin_cosine_loss<double>(e1, e2, batch.y.segment(start, n), params.config.margin) *
             static_cast<double>(n);
  }
  return batch.size() == 0 ? 0.0 : total / static_cast<double>(batch.size());
}

TrainResult train(const Corpus& train_corpus, const Corpus& valid_corpus,
                  const FeatureArchive& raw, const FeatureArchive& stacked,
                  const SamplerConfig& sampler_cfg, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg) {
  validate(net_cfg);
  validate(train_cfg);
  validate(sampler_cfg);
  if (stacked.dim != net_cfg.layer_dims.front())
    throw InputError("train: stacked features have " + std::to_string(stacked.dim) +
                     " columns but the network input is " +
                     std::to_string(net_cfg.layer_dims.front()));

  TrainResult result;
  NetworkParams<double> params = init_network(net_cfg, train_cfg.seed);
  AdamState adam = init_adam(params);
  const PairSampler sampler(train_corpus, sampler_cfg);
  const FramePairBatch valid = validation_batch(valid_corpus, raw, stacked, sampler_cfg);
  auto& report = result.report;
  report.initial_valid_loss = evaluate_loss(params, valid);

  double best_loss = std::numeric_limits<double>::infinity();
  result.params = params;
  long step = 0;
  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    const auto pairs = sampler.sample_epoch(static_cast<std::uint64_t>(epoch));
    const FramePairBatch batch = realize_pairs(pairs, raw, stacked);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(batch.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(train_cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long used = 0;
    Matrix x1, x2;
    Vector y;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_frames) {
      const std::size_t stop = std::min(order.size(), start + train_cfg.batch_frames);
      const auto n = static_cast<Eigen::Index>(stop - start);
      if (n < 2) continue;
      x1.resize(n, batch.x1.cols());
      x2.resize(n, batch.x2.cols());
      y.resize(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto src = order[start + static_cast<std::size_t>(k)];
        x1.row(k) = batch.x1.row(src);
        x2.row(k) = batch.x2.row(src);
        y(k) = batch.y(src);
      }
      Gradients<double> grads = zero_gradients(params);
      ForwardCache<double> c1, c2;
      double loss = 0.0;
      try {
        loss = loss_and_gradients<double>(params, x1, x2, y, grads, &c1, &c2);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " +
                                 e.what());
      }
      update_running_stats(params, c1);
      update_running_stats(params, c2);
      adam_step(params, grads, adam, ++step, train_cfg);
      loss_sum += loss * static_cast<double>(n);
      used += n;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.frame_pairs = used;
    rec.train_loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
    rec.valid_loss = evaluate_loss(params, valid);
    if (!std::isfinite(rec.valid_loss) || !std::isfinite(rec.train_loss))
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                               ": non-finite loss");
    report.epochs.push_back(rec);
    report.stopped_epoch = epoch;
    if (rec.valid_loss < best_loss) {
      best_loss = rec.valid_loss;
      report.best_epoch = epoch;
      result.params = params;
    } else if (epoch - report.best_epoch >= train_cfg.patience) {
      break;
    }
  }
  return result;
}

FeatureArchive embed_archive(const NetworkParams<double>& params, const FeatureArchive& stacked) {
  const int in_dim = params.config.layer_dims.front();
  if (!stacked.files.empty() && stacked.dim != in_dim)
    throw InputError("embed: archive has " + std::to_string(stacked.dim) +
                     " columns, network expects " + std::to_string(in_dim));
  FeatureArchive out;
  out.kind = FeatureKind::embedded;
  out.frame_period = stacked.frame_period;
  out.dim = params.config.layer_dims.back();
  for (const auto& [file, fm] : stacked.files) {
    FeatureMatrix e;
    e.file_id = file;
    e.frame_period = fm.frame_period;
    if (fm.data.rows() == 0)
      e.data.resize(0, out.dim);
    else
      e.data = forward<double>(params, fm.data, Mode::infer);
    out.add(std::move(e));
  }
  return out;
}

void write_train_report(const TrainReport& report, const std::filesystem::path& path) {
  using detail::format_double;
  auto out = detail::open_output(path);
  out << "epoch\ttrain_loss\tvalid_loss\tframe_pairs\n";
  out << "0\tnan\t" << format_double(report.initial_valid_loss) << "\t0\n";
  for (const auto& e : report.epochs)
    out << e.epoch << '\t' << format_double(e.train_loss) << '\t' << format_double(e.valid_loss)
        << '\t' << e.frame_pairs << '\n';
  out << "# best_epoch\t" << report.best_epoch << '\n';
  out << "# stopped_epoch\t" << report.stopped_epoch << '\n';
}

TrainReport read_train_report(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  TrainReport report;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = detail::location(path, line_no);
    const auto f = detail::split_fields(line, '\t');
    if (line_no == 1 || detail::trim(line).empty()) continue;
    if (f[0] == "# best_epoch" && f.size() == 2) {
      report.best_epoch = static_cast<int>(detail::parse_long(f[1], where));
    } else if (f[0] == "# stopped_epoch" && f.size() == 2) {
      report.stopped_epoch = static_cast<int>(detail::parse_long(f[1], where));
    } else if (f.size() == 4) {
      const long epoch = detail::parse_long(f[0], where);
      if (epoch == 0) {
        report.initial_valid_loss = detail::parse_double(f[2], where);
        continue;
      }
      EpochRecord rec;
      rec.epoch = static_cast<int>(epoch);
      rec.train_loss = detail::parse_double(f[1], where);
      rec.valid_loss = detail::parse_double(f[2], where);
      rec.frame_pairs = detail::parse_long(f[3], where);
      report.epochs.push_back(rec);
    } else {
      throw InputError(where + ": malformed train report line");
    }
  }
  return report;
}

namespace {

constexpr std::uint32_t kModelVersion = 1;

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  template <typename Derived>
  void tensor(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f32(m(i, j));
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size, std::string name)
      : data_(data), size_(size), name_(std::move(name)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() { return std::bit_cast<float>(u32()); }
  template <typename Derived>
  void tensor(Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f32();
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw InputError(name_ + ": truncated model file");
  }
  const unsigned char* data_;
  std::size_t size_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

// Layout: "ABN3", u32 version, u32 n_dims, u32 dims[n_dims], f32 margin,
// u32 batchnorm, f32 bn_momentum, f32 bn_eps; then per layer weight
// (row-major fan_in x fan_out), bias and, on hidden layers with batchnorm,
// scale, shift, running_mean, running_var; then the CRC32 of everything
// before it.
void save_model(const NetworkParams<double>& params, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw("ABN3", 4);
  w.u32(kModelVersion);
  const auto& cfg = params.config;
  w.u32(static_cast<std::uint32_t>(cfg.layer_dims.size()));
  for (int d : cfg.layer_dims) w.u32(static_cast<std::uint32_t>(d));
  w.f32(cfg.margin);
  w.u32(cfg.batchnorm ? 1u : 0u);
  w.f32(cfg.bn_momentum);
  w.f32(cfg.bn_eps);
  for (const auto& layer : params.layers) {
    w.tensor(layer.weight);
    w.tensor(layer.bias);
    if (layer.has_batchnorm()) {
      w.tensor(layer.bn_scale);
      w.tensor(layer.bn_shift);
      w.tensor(layer.running_mean);
      w.tensor(layer.running_var);
    }
  }
  auto& bytes = w.bytes();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
  w.u32(crc);
  auto out = detail::open_output(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

NetworkParams<double> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "ABN3", 4) != 0)
    throw InputError(name + ": not a model file");
  const std::size_t body = bytes.size() - 4;
  ByteReader crc_reader(bytes.data() + body, 4, name);
  const std::uint32_t stored = crc_reader.u32();
  const auto computed =
      static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != computed) throw InputError(name + ": CRC mismatch");

  ByteReader r(bytes.data() + 4, body - 4, name);
  if (r.u32() != kModelVersion) throw InputError(name + ": unsupported model version");
  NetConfig cfg;
  const std::uint32_t n_dims = r.u32();
  if (n_dims < 2 || n_dims > 64) throw InputError(name + ": bad layer count");
  cfg.layer_dims.resize(n_dims);
  for (auto& d : cfg.layer_dims) d = static_cast<int>(r.u32());
  cfg.margin = r.f32();
  cfg.batchnorm = r.u32() != 0;
  cfg.bn_momentum = r.f32();
  cfg.bn_eps = r.f32();

  NetworkParams<double> params = init_network(cfg, 0);
  for (auto& layer : params.layers) {
    r.tensor(layer.weight);
    r.tensor(layer.bias);
    if (layer.has_batchnorm()) {
      r.tensor(layer.bn_scale);
      r.tensor(layer.bn_shift);
      r.tensor(layer.running_mean);
      r.tensor(layer.running_var);
    }
  }
  if (r.pos() != body - 4) throw InputError(name + ": trailing bytes in model file");
  return params;
}

}  // namespace pairsamp
