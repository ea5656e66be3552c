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

#include "sase/dsp/stft.hpp"

#include <unsupported/Eigen/FFT>

#include "sase/autodiff/ops.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sase::dsp {
namespace {

using Complex = std::complex<double>;

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> e;
    e.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return e;
  }();
  return engine;
}

// Denominator of the least-squares overlap-add on the padded time axis.
std::vector<double> window_energy(const StftConfig& c, const std::vector<double>& win, std::size_t frames) {
  std::vector<double> denom((frames - 1) * c.hop + c.window_length, 0.0);
  for (std::size_t k = 0; k < frames; ++k)
    for (std::size_t t = 0; t < c.window_length; ++t) denom[k * c.hop + t] += win[t] * win[t];
  return denom;
}

constexpr double kTinyEnergy = 1e-10;

void check_spec_shape(const char* op, const Tensor& re, const Tensor& im, const StftConfig& c) {
  if (re.rank() != 2 || re.shape() != im.shape())
    throw ShapeError(std::string(op) + ": real/imag shapes " + shape_str(re.shape()) + " and " +
                     shape_str(im.shape()) + " differ or are not F x K");
  if (re.dim(0) != c.num_bins())
    throw std::invalid_argument(std::string(op) + ": spectrum has " + std::to_string(re.dim(0)) +
                                " bins but the STFT configuration implies " + std::to_string(c.num_bins()));
}

std::vector<double> overlap_add(const Tensor& re, const Tensor& im, const StftConfig& c,
                                std::size_t target_length) {
  const auto win = analysis_window(c);
  const std::size_t bins = re.dim(0), frames = re.dim(1);
  const auto denom = window_energy(c, win, frames);
  std::vector<double> acc(denom.size(), 0.0);
  std::vector<Complex> half(bins);
  std::vector<double> frame(c.dft_size);
  for (std::size_t k = 0; k < frames; ++k) {
    for (std::size_t f = 0; f < bins; ++f) half[f] = Complex(re.at(f, k), im.at(f, k));
    half.front().imag(0.0);
    half.back().imag(0.0);
    fft_engine().inv(frame, half, c.dft_size);
    for (std::size_t t = 0; t < c.window_length; ++t) acc[k * c.hop + t] += win[t] * frame[t];
  }
  std::vector<double> out(target_length, 0.0);
  const std::size_t pad = c.pad();
  for (std::size_t n = 0; n < target_length && n + pad < acc.size(); ++n) {
    const double d = denom[n + pad];
    out[n] = d > kTinyEnergy ? acc[n + pad] / d : 0.0;
  }
  return out;
}

}  // namespace

std::size_t StftConfig::num_frames(std::size_t length) const {
  return 1 + (length + 2 * pad() - window_length) / hop;
}

void StftConfig::validate() const {
  if (hop == 0 || window_length < 2 * hop)
    throw std::invalid_argument("StftConfig: window_length / hop must be >= 2 (window " +
                                std::to_string(window_length) + ", hop " + std::to_string(hop) + ")");
  if (dft_size < window_length || dft_size % 2 != 0)
    throw std::invalid_argument("StftConfig: dft_size must be even and >= window_length");
}

std::vector<double> analysis_window(const StftConfig& c) {
  std::vector<double> w(c.window_length);
  const double n = static_cast<double>(c.window_length);
  for (std::size_t i = 0; i < c.window_length; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    w[i] = 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
  }
  return w;
}

Spectrogram stft(std::span<const double> x, const StftConfig& c) {
  c.validate();
  if (x.size() < c.window_length)
    throw std::invalid_argument("stft: waveform has " + std::to_string(x.size()) +
                                " samples, at least " + std::to_string(c.window_length) + " required");
  const std::size_t pad = c.pad();
  const std::size_t len = x.size();
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    if (i < pad) {
      padded[i] = x[pad - i];
    } else if (i < pad + len) {
      padded[i] = x[i - pad];
    } else {
      padded[i] = x[len - 2 - (i - pad - len)];
    }
  }

  const auto win = analysis_window(c);
  const std::size_t frames = c.num_frames(len);
  const std::size_t bins = c.num_bins();
  Spectrogram spec{Tensor({bins, frames}), Tensor({bins, frames}), c};
  std::vector<double> frame(c.dft_size, 0.0);
  std::vector<Complex> half;
  for (std::size_t k = 0; k < frames; ++k) {
    for (std::size_t t = 0; t < c.window_length; ++t) frame[t] = padded[k * c.hop + t] * win[t];
    fft_engine().fwd(half, frame);
    for (std::size_t f = 0; f < bins; ++f) {
      spec.real.at(f, k) = half[f].real();
      spec.imag.at(f, k) = half[f].imag();
    }
  }
  return spec;
}

std::vector<double> istft(const Spectrogram& spec, const StftConfig& c, std::size_t target_length) {
  c.validate();
  if (!(spec.config == c)) throw std::invalid_argument("istft: spectrogram was computed with a different configuration");
  check_spec_shape("istft", spec.real, spec.imag, c);
  return overlap_add(spec.real, spec.imag, c, target_length);
}

Var istft(Var real, Var imag, const StftConfig& c, std::size_t target_length) {
  c.validate();
  if (!real.valid() || real.tape() != imag.tape())
    throw std::invalid_argument("istft: inputs must live on the same tape");
  check_spec_shape("istft", real.value(), imag.value(), c);
  Tensor y({target_length}, overlap_add(real.value(), imag.value(), c, target_length));
  const int ir = real.id(), ii = imag.id();
  const std::size_t bins = real.dim(0), frames = real.dim(1);
  return real.tape()->record(std::move(y), {ir, ii}, [ir, ii, c, bins, frames, target_length](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const auto win = analysis_window(c);
    const auto denom = window_energy(c, win, frames);
    std::vector<double> gpad(denom.size(), 0.0);
    const std::size_t pad = c.pad();
    for (std::size_t n = 0; n < target_length && n + pad < gpad.size(); ++n) {
      const double d = denom[n + pad];
      gpad[n + pad] = d > kTinyEnergy ? g[n] / d : 0.0;
    }
    const double inv_n = 1.0 / static_cast<double>(c.dft_size);
    std::vector<double> frame(c.dft_size, 0.0);
    std::vector<Complex> half;
    const bool need_r = t.requires_grad(ir), need_i = t.requires_grad(ii);
    for (std::size_t k = 0; k < frames; ++k) {
      for (std::size_t s = 0; s < c.window_length; ++s) frame[s] = win[s] * gpad[k * c.hop + s];
      fft_engine().fwd(half, frame);
      for (std::size_t f = 0; f < bins; ++f) {
        const bool edge = f == 0 || f == bins - 1;
        const double w = (edge ? 1.0 : 2.0) * inv_n;
        if (need_r) t.grad_buffer(ir).at(f, k) += w * half[f].real();
        if (need_i && !edge) t.grad_buffer(ii).at(f, k) += w * half[f].imag();
      }
    }
  });
}

Spectrogram apply_mask(const Spectrogram& spec, const ComplexMask& mask) {
  if (mask.real.shape() != spec.real.shape() || mask.imag.shape() != spec.real.shape())
    throw ShapeError("apply_mask: mask " + shape_str(mask.real.shape()) + "/" + shape_str(mask.imag.shape()) +
                     " does not match spectrogram " + shape_str(spec.real.shape()));
  Spectrogram out{Tensor(spec.real.shape()), Tensor(spec.real.shape()), spec.config};
  for (std::size_t i = 0; i < spec.real.size(); ++i) {
    const double a = spec.real[i], b = spec.imag[i], cr = mask.real[i], ci = mask.imag[i];
    out.real[i] = a * cr - b * ci;
    out.imag[i] = a * ci + b * cr;
  }
  return out;
}

std::pair<Var, Var> apply_mask(Var mask_real, Var mask_imag, const Spectrogram& spec) {
  if (mask_real.shape() != spec.real.shape() || mask_imag.shape() != spec.real.shape())
    throw ShapeError("apply_mask: mask " + shape_str(mask_real.shape()) + "/" + shape_str(mask_imag.shape()) +
                     " does not match spectrogram " + shape_str(spec.real.shape()));
  Tape& tape = *mask_real.tape();
  Var xr = tape.constant(spec.real);
  Var xi = tape.constant(spec.imag);
  using namespace ops;
  return {mask_real * xr - mask_imag * xi, mask_real * xi + mask_imag * xr};
}

Tensor log_amplitude_features(const Spectrogram& spec) {
  Tensor out(spec.real.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::log(std::hypot(spec.real[i], spec.imag[i]) + kLogFloor);
  return out;
}

NormStats compute_norm_stats(std::span<const Tensor> features) {
  if (features.empty()) throw std::invalid_argument("compute_norm_stats: no feature grids");
  const std::size_t bins = features.front().dim(0);
  std::vector<double> sum(bins, 0.0);
  std::size_t count = 0;
  for (const auto& f : features) {
    if (f.rank() != 2 || f.dim(0) != bins)
      throw ShapeError("compute_norm_stats: grid " + shape_str(f.shape()) + " does not have " +
                       std::to_string(bins) + " rows");
    for (std::size_t b = 0; b < bins; ++b)
      for (std::size_t k = 0; k < f.dim(1); ++k) sum[b] += f.at(b, k);
    count += f.dim(1);
  }
  NormStats stats{Tensor({bins}), Tensor({bins})};
  for (std::size_t b = 0; b < bins; ++b) stats.mean[b] = sum[b] / static_cast<double>(count);
  // Second pass keeps the variance free of cancellation.
  for (const auto& f : features)
    for (std::size_t b = 0; b < bins; ++b)
      for (std::size_t k = 0; k < f.dim(1); ++k) {
        const double d = f.at(b, k) - stats.mean[b];
        stats.variance[b] += d * d;
      }
  for (std::size_t b = 0; b < bins; ++b) stats.variance[b] /= static_cast<double>(count);
  return stats;
}

namespace {

void check_stats(const char* op, const Tensor& features, const NormStats& stats) {
  if (features.rank() != 2 || stats.mean.shape() != Shape{features.dim(0)} ||
      stats.variance.shape() != Shape{features.dim(0)})
    throw ShapeError(std::string(op) + ": features " + shape_str(features.shape()) + " vs stats " +
                     shape_str(stats.mean.shape()) + "/" + shape_str(stats.variance.shape()));
}

}  // namespace

Tensor normalize_per_frequency(const Tensor& features, const NormStats& stats) {
  check_stats("normalize_per_frequency", features, stats);
  Tensor out(features.shape());
  for (std::size_t b = 0; b < features.dim(0); ++b) {
    if (stats.variance[b] < 0.0) throw std::invalid_argument("normalize_per_frequency: negative variance");
    const double inv = 1.0 / std::sqrt(stats.variance[b] + kLogFloor);
    for (std::size_t k = 0; k < features.dim(1); ++k) out.at(b, k) = (features.at(b, k) - stats.mean[b]) * inv;
  }
  return out;
}

Tensor denormalize_per_frequency(const Tensor& normalized, const NormStats& stats) {
  check_stats("denormalize_per_frequency", normalized, stats);
  Tensor out(normalized.shape());
  for (std::size_t b = 0; b < normalized.dim(0); ++b) {
    const double s = std::sqrt(stats.variance[b] + kLogFloor);
    for (std::size_t k = 0; k < normalized.dim(1); ++k) out.at(b, k) = normalized.at(b, k) * s + stats.mean[b];
  }
  return out;
}

}  // namespace sase::dsp
