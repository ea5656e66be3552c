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

// Complex-mask enhancement network with a speaker-aware auxiliary branch.
//
//   features -> front end -> C (D x K)
//   features -> speaker front end -> BLSTM -> aux (D x K)
//   [C; aux] -> recurrent block -> B (2D x K)
//   C -> linear -> attention modules -> M (D/2 x K)
//   [B; M] -> linear -> mask (2F x K), split into real and imaginary halves
//   aux -> linear -> logits (L x K) -> frame mean -> softmax -> posterior

#ifndef SASE_MODEL_MODEL_HPP_
#define SASE_MODEL_MODEL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sase/autodiff/params.hpp"
#include "sase/dsp/stft.hpp"
#include "sase/nn/layers.hpp"

namespace sase::model {

struct ModelConfig {
  std::size_t feature_dim = 600;  // D
  std::size_t heads = 4;
  std::size_t freq_bins = 257;  // F
  std::size_t speakers = 28;    // L
  std::array<std::size_t, 2> cnn_channels{45, 90};
  std::array<std::size_t, 2> spk_channels{30, 60};
  std::size_t recurrent_layers = 2;
  std::size_t attention_modules = 2;
  /// false replaces both convolutional front ends by linear + leaky-ReLU.
  bool use_cnn = true;
  /// false drops the auxiliary branch and the speaker head.
  bool use_spk = true;
  nn::CellKind cell = nn::CellKind::kLstm;

  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Every intermediate of one forward pass. Members of disabled branches stay
/// invalid (default-constructed Var).
struct ModelOutput {
  Var mask_real;   // F x K
  Var mask_imag;   // F x K
  Var embedding;   // C: D x K
  Var aux;         // D x K
  Var recurrent;   // B: 2D x K
  Var reduced;     // D/2 x K, input of the attention modules
  Var attended;    // M: D/2 x K
  Var logits;      // L x K
  Var posterior;   // L
  std::vector<std::vector<Tensor>> attention;  // [module][head], K x K
};

struct Model {
  ModelConfig config;
  dsp::StftConfig stft;
  dsp::NormStats norm;  // per-frequency statistics of the training features
  ParamStore params;
};

/// Adds every parameter for `config` to a fresh store, seeded.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

/// Builds a model with unit normalisation statistics.
Model init_model(const ModelConfig& config, const dsp::StftConfig& stft, std::uint64_t seed);

// Blocks. All take normalised features laid out 1 x F x K (or F x K for the
// linear front end, which reshapes internally).

Var cnn_block(nn::ParamBinder& bind, const std::string& prefix, const ModelConfig& config,
              const std::array<std::size_t, 2>& channels, Var features);
Var spk_block(nn::ParamBinder& bind, const ModelConfig& config, Var features);
Var blstm_block(nn::ParamBinder& bind, const ModelConfig& config, Var embedding, const Var* aux);
/// Writes the reduced input into `reduced` when given.
Var mhsa_block(nn::ParamBinder& bind, const ModelConfig& config, Var embedding,
               std::vector<std::vector<Tensor>>* attention = nullptr, Var* reduced = nullptr);

/// Full network on normalised features (F x K).
ModelOutput forward(nn::ParamBinder& bind, const ModelConfig& config, Var features, bool keep_attention = false);

/// Normalised log-amplitude features of a spectrogram, F x K.
Tensor model_features(const Model& model, const dsp::Spectrogram& spec);

/// Enhanced waveform on a tape: istft(mask * stft(x)) trimmed to |x|.
/// `out` receives the network intermediates when non-null; attention maps
/// are copied into it only with `keep_attention`.
Var enhance_graph(nn::ParamBinder& bind, const Model& model, std::span<const double> mixture,
                  ModelOutput* out = nullptr, bool keep_attention = false);

struct Diagnostics {
  Tensor frame_posteriors;  // L x K, softmax of each logit column
  std::vector<std::vector<Tensor>> attention;
};

/// Inference. Throws std::invalid_argument for inputs shorter than a window.
std::vector<double> enhance(const Model& model, std::span<const double> mixture, Diagnostics* diagnostics = nullptr);

/// Applies a given mask instead of the network output.
std::vector<double> enhance_with_mask(const dsp::StftConfig& stft, std::span<const double> mixture,
                                      const dsp::ComplexMask& mask);

/// Column-wise softmax of an L x K grid.
Tensor frame_posteriors(const Tensor& logits);

}  // namespace sase::model

#endif  // SASE_MODEL_MODEL_HPP_
