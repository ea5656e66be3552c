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

#include "sase/objectives/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sase::objectives {
namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

double energy(std::span<const double> v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

void check_lengths(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": signal lengths differ (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("LossConfig: alpha must be >= 0 and beta, epsilon > 0 (alpha=" +
                                std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
}

double sdr(std::span<const double> reference, std::span<const double> estimate, double eps) {
  check_lengths(reference.size(), estimate.size(), "sdr");
  const double num = energy(reference);
  if (num == 0.0) throw DataError("sdr: reference signal is all zeros");
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) err += (reference[i] - estimate[i]) * (reference[i] - estimate[i]);
  return 10.0 * std::log10(num / (err + eps));
}

double clip(double x, double beta) { return beta * std::tanh(x / beta); }

double si_sdr(std::span<const double> reference, std::span<const double> estimate) {
  check_lengths(reference.size(), estimate.size(), "si_sdr");
  const double ss = energy(reference);
  if (ss == 0.0) throw DataError("si_sdr: reference signal is all zeros");
  double dot = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) dot += reference[i] * estimate[i];
  const double a = dot / ss;
  double target = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = a * reference[i];
    target += t * t;
    resid += (estimate[i] - t) * (estimate[i] - t);
  }
  if (target == 0.0) return -kSiSdrCap;
  if (resid == 0.0) return kSiSdrCap;
  return std::clamp(10.0 * std::log10(target / resid), -kSiSdrCap, kSiSdrCap);
}

LossBreakdown evaluate_sdr_loss(std::span<const double> clean, std::span<const double> estimate,
                                std::span<const double> mixture, const LossConfig& cfg) {
  cfg.validate();
  check_lengths(clean.size(), estimate.size(), "sdr_loss");
  check_lengths(clean.size(), mixture.size(), "sdr_loss");
  std::vector<double> noise(clean.size()), residual(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    noise[i] = mixture[i] - clean[i];
    residual[i] = mixture[i] - estimate[i];
  }
  if (energy(clean) == 0.0) throw DataError("sdr_loss: clean speech reference is all zeros");
  if (energy(noise) == 0.0) throw DataError("sdr_loss: noise reference (mixture - clean) is all zeros");
  LossBreakdown b;
  b.sdr_speech = clip(sdr(clean, estimate, cfg.epsilon), cfg.beta);
  b.sdr_noise = clip(sdr(noise, residual, cfg.epsilon), cfg.beta);
  b.total = b.sdr_loss();
  return b;
}

// ---------------------------------------------------------------------------

Var sdr(Var reference, Var estimate, double eps) {
  const double num = energy(reference.value().data());
  if (num == 0.0) throw DataError("sdr: reference signal is all zeros");
  check_lengths(reference.value().size(), estimate.value().size(), "sdr");
  Var err = ops::add_scalar(ops::sum(ops::square(ops::sub(reference, estimate))), eps);
  return ops::add_scalar(ops::scale(ops::log(err), -kDbPerNeper), 10.0 * std::log10(num));
}

Var clip(Var x, double beta) { return ops::scale(ops::tanh(ops::scale(x, 1.0 / beta)), beta); }

Var sdr_loss(Var clean, Var estimate, Var mixture, const LossConfig& cfg, LossBreakdown* parts) {
  cfg.validate();
  check_lengths(clean.value().size(), estimate.value().size(), "sdr_loss");
  check_lengths(clean.value().size(), mixture.value().size(), "sdr_loss");
  if (energy(clean.value().data()) == 0.0) throw DataError("sdr_loss: clean speech reference is all zeros");
  Var noise = ops::sub(mixture, clean);
  if (energy(noise.value().data()) == 0.0)
    throw DataError("sdr_loss: noise reference (mixture - clean) is all zeros");
  Var residual = ops::sub(mixture, estimate);
  Var speech_term = clip(sdr(clean, estimate, cfg.epsilon), cfg.beta);
  Var noise_term = clip(sdr(noise, residual, cfg.epsilon), cfg.beta);
  Var loss = ops::scale(ops::add(speech_term, noise_term), -0.5);
  if (parts != nullptr) {
    parts->sdr_speech = speech_term.value()[0];
    parts->sdr_noise = noise_term.value()[0];
    parts->total = loss.value()[0];
  }
  return loss;
}

Var cross_entropy(Var posterior, std::size_t label, double eps) {
  const std::size_t n = posterior.value().size();
  if (label >= n)
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside " + std::to_string(n) +
                            " classes");
  Var p = ops::slice(ops::reshape(posterior, {n}), 0, label, label + 1);
  return ops::neg(ops::log(p, eps));
}

MultitaskLoss multitask_loss(Var clean, Var estimate, Var mixture, const Var* posterior, std::size_t label,
                             const LossConfig& cfg) {
  MultitaskLoss out;
  out.total = sdr_loss(clean, estimate, mixture, cfg, &out.parts);
  out.parts.alpha = cfg.alpha;
  if (posterior != nullptr) {
    Var ce = cross_entropy(*posterior, label, cfg.epsilon);
    out.parts.cross_entropy = ce.value()[0];
    out.total = ops::add(out.total, ops::scale(ce, cfg.alpha));
  }
  out.parts.total = out.total.value()[0];
  return out;
}

}  // namespace sase::objectives
