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

#ifndef SASE_DSP_STFT_HPP_
#define SASE_DSP_STFT_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "sase/autodiff/tape.hpp"

namespace sase::dsp {

enum class WindowKind { kBlackman };

struct StftConfig {
  std::size_t dft_size = 512;
  std::size_t hop = 128;
  std::size_t window_length = 512;
  WindowKind window = WindowKind::kBlackman;

  std::size_t num_bins() const { return dft_size / 2 + 1; }
  std::size_t pad() const { return window_length / 2; }
  /// Frames produced for a signal of `length` samples.
  std::size_t num_frames(std::size_t length) const;
  /// Throws std::invalid_argument unless hop <= window_length / 2,
  /// window_length <= dft_size and dft_size is even.
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Periodic analysis window of `config.window_length` points.
std::vector<double> analysis_window(const StftConfig& config);

/// One-sided complex spectrum, F x K real and imaginary grids.
struct Spectrogram {
  Tensor real;
  Tensor imag;
  StftConfig config;

  std::size_t bins() const { return real.dim(0); }
  std::size_t frames() const { return real.dim(1); }
};

/// Complex time-frequency gain, same F x K layout as a Spectrogram.
struct ComplexMask {
  Tensor real;
  Tensor imag;
};

/// Frames are centred on multiples of the hop after reflect-padding half a
/// window at both ends, so K = 1 + floor(length / hop) for the default
/// geometry. Throws std::invalid_argument for inputs shorter than a window.
Spectrogram stft(std::span<const double> waveform, const StftConfig& config);

/// Least-squares overlap-add inverse: each sample is the window-weighted sum
/// of the frames covering it divided by the summed squared window. Output
/// is trimmed or zero-padded to `target_length`.
std::vector<double> istft(const Spectrogram& spec, const StftConfig& config, std::size_t target_length);

/// Differentiable istft of a spectrum held on a tape (F x K real/imag).
Var istft(Var real, Var imag, const StftConfig& config, std::size_t target_length);

/// Element-wise complex product.
Spectrogram apply_mask(const Spectrogram& spec, const ComplexMask& mask);

/// Complex product of a tape-held mask with a fixed spectrum; returns the
/// real and imaginary parts.
std::pair<Var, Var> apply_mask(Var mask_real, Var mask_imag, const Spectrogram& spec);

constexpr double kLogFloor = 1e-8;

/// log(|X| + 1e-8) per bin, F x K.
Tensor log_amplitude_features(const Spectrogram& spec);

/// Per-frequency feature statistics accumulated over a corpus.
struct NormStats {
  Tensor mean;      // F
  Tensor variance;  // F, population variance
};

/// Pools every frame of every feature grid (each F x K).
NormStats compute_norm_stats(std::span<const Tensor> features);

/// (x - mean_f) / sqrt(var_f + 1e-8) row by row.
Tensor normalize_per_frequency(const Tensor& features, const NormStats& stats);
Tensor denormalize_per_frequency(const Tensor& normalized, const NormStats& stats);

}  // namespace sase::dsp

#endif  // SASE_DSP_STFT_HPP_
