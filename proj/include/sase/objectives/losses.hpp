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

// Training losses and evaluation metrics on time-domain signals.

#ifndef SASE_OBJECTIVES_LOSSES_HPP_
#define SASE_OBJECTIVES_LOSSES_HPP_

#include <cstddef>
#include <span>

#include "sase/autodiff/ops.hpp"

namespace sase::objectives {

constexpr double kEpsilon = 1e-8;
/// SI-SDR is reported inside [-kSiSdrCap, kSiSdrCap] dB.
constexpr double kSiSdrCap = 100.0;

struct LossConfig {
  double alpha = 1.0;  // weight of the speaker cross-entropy
  double beta = 20.0;  // soft clip level in dB
  double epsilon = kEpsilon;

  /// Throws std::invalid_argument unless alpha, beta and epsilon are positive.
  /// alpha == 0 is accepted so that the pure SDR loss can be expressed.
  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double total = 0.0;
  double sdr_speech = 0.0;  // clipped SDR(s, y)
  double sdr_noise = 0.0;   // clipped SDR(n, m)
  double cross_entropy = 0.0;
  double alpha = 0.0;

  double sdr_loss() const { return -0.5 * (sdr_speech + sdr_noise); }
};

// ---------------------------------------------------------------------------
// Plain evaluation

/// 10 log10(|s|^2 / (|s - y|^2 + eps)). Throws std::invalid_argument on a
/// length mismatch and DataError on an all-zero reference.
double sdr(std::span<const double> reference, std::span<const double> estimate, double eps = kEpsilon);

/// beta * tanh(x / beta).
double clip(double x, double beta);

/// Scale-invariant SDR in dB, capped to +-kSiSdrCap. An estimate orthogonal
/// to the reference reports -kSiSdrCap; an exact rescaling +kSiSdrCap.
double si_sdr(std::span<const double> reference, std::span<const double> estimate);

/// Non-differentiable mirror of sdr_loss for reporting.
LossBreakdown evaluate_sdr_loss(std::span<const double> clean, std::span<const double> estimate,
                                std::span<const double> mixture, const LossConfig& cfg);

// ---------------------------------------------------------------------------
// Differentiable versions. Signals are rank-1 tensors; only `estimate` is
// expected to carry gradient.

Var sdr(Var reference, Var estimate, double eps = kEpsilon);
Var clip(Var x, double beta);

/// -1/2 (clip(SDR(s, y)) + clip(SDR(n, m))) with m = x - y and n = x - s.
/// Throws DataError naming the clean or noise reference when it is zero.
Var sdr_loss(Var clean, Var estimate, Var mixture, const LossConfig& cfg, LossBreakdown* parts = nullptr);

/// -log(max(posterior[label], eps)). Throws std::out_of_range for a label
/// outside the posterior.
Var cross_entropy(Var posterior, std::size_t label, double eps = kEpsilon);

struct MultitaskLoss {
  Var total;
  LossBreakdown parts;
};

/// sdr_loss + alpha * CE. Without a posterior (speaker branch disabled) the
/// CE term is left out and reported as zero.
MultitaskLoss multitask_loss(Var clean, Var estimate, Var mixture, const Var* posterior, std::size_t label,
                             const LossConfig& cfg);

}  // namespace sase::objectives

#endif  // SASE_OBJECTIVES_LOSSES_HPP_
