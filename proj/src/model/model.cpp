// Copyright 2026 The sase Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sase/model/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sase::model {
namespace {

nn::Conv2dSpec conv5(std::size_t in, std::size_t out) { return {in, out, 5, {2, 2}, {1, 1}}; }
nn::Conv2dSpec conv1(std::size_t in) { return {in, 1, 1, {0, 0}, {1, 1}}; }

nn::BiRnnSpec spk_rnn(const ModelConfig& c) { return {c.cell, c.feature_dim, c.feature_dim / 2, 1}; }

nn::BiRnnSpec main_rnn(const ModelConfig& c) {
  const std::size_t in = c.use_spk ? 2 * c.feature_dim : c.feature_dim;
  return {c.cell, in, c.feature_dim, c.recurrent_layers};
}

nn::MhsaSpec attention_spec(const ModelConfig& c) { return {c.feature_dim / 2, c.heads}; }

std::size_t mask_input_dim(const ModelConfig& c) {
  return 2 * c.feature_dim + (c.attention_modules > 0 ? c.feature_dim / 2 : 0);
}

void add_front_end(ParamStore& p, const std::string& prefix, const ModelConfig& c,
                   const std::array<std::size_t, 2>& ch, std::mt19937_64& rng) {
  if (c.use_cnn) {
    nn::add_conv2d(p, prefix + ".conv1", conv5(1, ch[0]), rng);
    nn::add_instance_norm(p, prefix + ".norm1", ch[0]);
    nn::add_conv2d(p, prefix + ".conv2", conv5(ch[0], ch[1]), rng);
    nn::add_instance_norm(p, prefix + ".norm2", ch[1]);
    nn::add_conv2d(p, prefix + ".conv3", conv1(ch[1]), rng);
  }
  nn::add_linear(p, prefix + ".fc", c.freq_bins, c.feature_dim, rng);
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("ModelConfig: " + why); };
  if (feature_dim < 2 || feature_dim % 2 != 0) fail("feature dimension must be even and >= 2");
  if (freq_bins == 0) fail("frequency bins must be positive");
  if (recurrent_layers == 0) fail("at least one recurrent layer is required");
  if (use_spk && speakers < 2) fail("the speaker head needs at least 2 speakers");
  if (use_cnn && (cnn_channels[0] == 0 || cnn_channels[1] == 0 || spk_channels[0] == 0 || spk_channels[1] == 0))
    fail("convolution channel counts must be positive");
  if (attention_modules > 0 && (heads == 0 || (feature_dim / 2) % heads != 0))
    fail(std::to_string(heads) + " heads do not divide D/2 = " + std::to_string(feature_dim / 2));
}

ParamStore init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  ParamStore p;
  add_front_end(p, "cnn", c, c.cnn_channels, rng);
  if (c.use_spk) {
    add_front_end(p, "spk.cnn", c, c.spk_channels, rng);
    nn::add_birnn(p, "spk.rnn", spk_rnn(c), rng);
  }
  nn::add_birnn(p, "blstm", main_rnn(c), rng);
  if (c.attention_modules > 0) {
    nn::add_linear(p, "mhsa.fc", c.feature_dim, c.feature_dim / 2, rng);
    for (std::size_t m = 0; m < c.attention_modules; ++m)
      nn::add_mhsa(p, "mhsa.m" + std::to_string(m), attention_spec(c), rng);
  }
  nn::add_linear(p, "mask", mask_input_dim(c), 2 * c.freq_bins, rng);
  if (c.use_spk) nn::add_linear(p, "speaker", c.feature_dim, c.speakers, rng);
  return p;
}

Model init_model(const ModelConfig& config, const dsp::StftConfig& stft, std::uint64_t seed) {
  stft.validate();
  if (stft.num_bins() != config.freq_bins)
    throw std::invalid_argument("init_model: model expects " + std::to_string(config.freq_bins) +
                                " frequency bins but the STFT gives " + std::to_string(stft.num_bins()));
  Model m{config, stft, {Tensor::zeros({config.freq_bins}), Tensor::full({config.freq_bins}, 1.0)},
          init_params(config, seed)};
  return m;
}

Var cnn_block(nn::ParamBinder& bind, const std::string& prefix, const ModelConfig& c,
              const std::array<std::size_t, 2>& ch, Var features) {
  const std::size_t f = c.freq_bins;
  if (features.shape().size() != 2 || features.dim(0) != f)
    throw ShapeError("cnn_block: expected features " + std::to_string(f) + " x K, got " + shape_str(features.shape()));
  const std::size_t k = features.dim(1);
  if (!c.use_cnn) return nn::leaky_relu(nn::linear(bind, prefix + ".fc", features));
  Var x = ops::reshape(features, {1, f, k});
  x = nn::leaky_relu(nn::instance_norm(bind, prefix + ".norm1", nn::conv2d(bind, prefix + ".conv1", conv5(1, ch[0]), x)));
  x = nn::leaky_relu(
      nn::instance_norm(bind, prefix + ".norm2", nn::conv2d(bind, prefix + ".conv2", conv5(ch[0], ch[1]), x)));
  x = nn::conv2d(bind, prefix + ".conv3", conv1(ch[1]), x);
  return nn::linear(bind, prefix + ".fc", ops::reshape(x, {f, k}));
}

Var spk_block(nn::ParamBinder& bind, const ModelConfig& c, Var features) {
  Var front = cnn_block(bind, "spk.cnn", c, c.spk_channels, features);
  return nn::birnn(bind, "spk.rnn", spk_rnn(c), front);
}

Var blstm_block(nn::ParamBinder& bind, const ModelConfig& c, Var embedding, const Var* aux) {
  Var in = embedding;
  if (aux != nullptr) {
    if (aux->shape() != embedding.shape())
      throw ShapeError("blstm_block: embedding " + shape_str(embedding.shape()) + " and auxiliary feature " +
                       shape_str(aux->shape()) + " differ");
    in = ops::concat({embedding, *aux}, 0);
  }
  return nn::birnn(bind, "blstm", main_rnn(c), in);
}

Var mhsa_block(nn::ParamBinder& bind, const ModelConfig& c, Var embedding,
               std::vector<std::vector<Tensor>>* attention, Var* reduced) {
  Var g = nn::linear(bind, "mhsa.fc", embedding);
  if (reduced != nullptr) *reduced = g;
  const nn::MhsaSpec spec = attention_spec(c);
  for (std::size_t m = 0; m < c.attention_modules; ++m) {
    std::vector<Tensor> maps;
    g = nn::mhsa_module(bind, "mhsa.m" + std::to_string(m), spec, g, attention != nullptr ? &maps : nullptr);
    if (attention != nullptr) attention->push_back(std::move(maps));
  }
  return g;
}

ModelOutput forward(nn::ParamBinder& bind, const ModelConfig& c, Var features, bool keep_attention) {
  ModelOutput out;
  out.embedding = cnn_block(bind, "cnn", c, c.cnn_channels, features);
  if (c.use_spk) out.aux = spk_block(bind, c, features);
  out.recurrent = blstm_block(bind, c, out.embedding, c.use_spk ? &out.aux : nullptr);
  Var head_in = out.recurrent;
  if (c.attention_modules > 0) {
    out.attended = mhsa_block(bind, c, out.embedding, keep_attention ? &out.attention : nullptr, &out.reduced);
    head_in = ops::concat({out.recurrent, out.attended}, 0);
  }
  Var mask = nn::linear(bind, "mask", head_in);
  out.mask_real = ops::slice(mask, 0, 0, c.freq_bins);
  out.mask_imag = ops::slice(mask, 0, c.freq_bins, 2 * c.freq_bins);
  if (c.use_spk) {
    out.logits = nn::linear(bind, "speaker", out.aux);
    out.posterior = ops::softmax(ops::reshape(ops::mean_axis(out.logits, 1), {c.speakers}));
  }
  return out;
}

Tensor model_features(const Model& model, const dsp::Spectrogram& spec) {
  return dsp::normalize_per_frequency(dsp::log_amplitude_features(spec), model.norm);
}

Var enhance_graph(nn::ParamBinder& bind, const Model& model, std::span<const double> mixture, ModelOutput* out,
                  bool keep_attention) {
  const dsp::Spectrogram spec = dsp::stft(mixture, model.stft);
  if (spec.bins() != model.config.freq_bins)
    throw std::invalid_argument("enhance: STFT gives " + std::to_string(spec.bins()) + " bins, model expects " +
                                std::to_string(model.config.freq_bins));
  Var features = bind.tape().constant(model_features(model, spec));
  ModelOutput o = forward(bind, model.config, features, out != nullptr && keep_attention);
  auto [yr, yi] = dsp::apply_mask(o.mask_real, o.mask_imag, spec);
  Var y = dsp::istft(yr, yi, model.stft, mixture.size());
  if (out != nullptr) *out = std::move(o);
  return y;
}

Tensor frame_posteriors(const Tensor& logits) {
  const std::size_t l = logits.dim(0), k = logits.dim(1);
  Tensor p = Tensor::zeros({l, k});
  for (std::size_t j = 0; j < k; ++j) {
    double m = logits.at(0, j);
    for (std::size_t i = 1; i < l; ++i) m = std::max(m, logits.at(i, j));
    double z = 0.0;
    for (std::size_t i = 0; i < l; ++i) z += std::exp(logits.at(i, j) - m);
    for (std::size_t i = 0; i < l; ++i) p.at(i, j) = std::exp(logits.at(i, j) - m) / z;
  }
  return p;
}

std::vector<double> enhance(const Model& model, std::span<const double> mixture, Diagnostics* diagnostics) {
  Tape tape;
  nn::ParamBinder bind(tape, model.params);
  ModelOutput out;
  Var y = enhance_graph(bind, model, mixture, diagnostics != nullptr ? &out : nullptr, diagnostics != nullptr);
  if (diagnostics != nullptr) {
    diagnostics->frame_posteriors = model.config.use_spk ? frame_posteriors(out.logits.value()) : Tensor();
    diagnostics->attention = std::move(out.attention);
  }
  const auto data = y.value().data();
  return {data.begin(), data.end()};
}

std::vector<double> enhance_with_mask(const dsp::StftConfig& stft, std::span<const double> mixture,
                                      const dsp::ComplexMask& mask) {
  const dsp::Spectrogram spec = dsp::stft(mixture, stft);
  return dsp::istft(dsp::apply_mask(spec, mask), stft, mixture.size());
}

}  // namespace sase::model
