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

// Layer primitives over named parameters.
//
// Every layer has an `add_*` function that creates its parameters in a
// ParamStore under a prefix, and a forward function that looks them up
// through a ParamBinder. Sequences are laid out features x frames (N x K).

#ifndef SASE_NN_LAYERS_HPP_
#define SASE_NN_LAYERS_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sase/autodiff/ops.hpp"
#include "sase/autodiff/params.hpp"

namespace sase::nn {

constexpr double kLeakySlope = 0.01;

/// Maps parameter names to tape leaves for one forward pass. Each parameter
/// becomes a single leaf however often it is used, and its adjoint lands in
/// the matching entry of `grads` when one is given.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const ParamStore& params, ParamStore* grads = nullptr);

  Var operator()(const std::string& name);
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  const ParamStore& params_;
  ParamStore* grads_;
  std::vector<int> leaf_;
};

// ---------------------------------------------------------------------------
// Initialisation

/// Uniform(-b, b) with b = gain * sqrt(3 / fan_in).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, double gain, std::mt19937_64& rng);
/// Gain for leaky-ReLU networks, sqrt(2 / (1 + slope^2)).
double leaky_relu_gain(double slope = kLeakySlope);
/// n x n orthogonal matrix from the QR factorisation of a Gaussian matrix.
Tensor orthogonal(std::size_t n, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Dense

/// weight (out x in), bias (out).
void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng, bool bias = true);
/// W x + b applied to every column of x (in x K).
Var linear(ParamBinder& bind, const std::string& prefix, Var x, bool bias = true);

// ---------------------------------------------------------------------------
// Convolution and normalisation

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 5;
  std::pair<std::size_t, std::size_t> padding{2, 2};
  std::pair<std::size_t, std::size_t> stride{1, 1};
};

void add_conv2d(ParamStore& store, const std::string& prefix, const Conv2dSpec& spec, std::mt19937_64& rng);
/// x: C_in x F x K  ->  C_out x F' x K'.
Var conv2d(ParamBinder& bind, const std::string& prefix, const Conv2dSpec& spec, Var x);

void add_instance_norm(ParamStore& store, const std::string& prefix, std::size_t channels);
Var instance_norm(ParamBinder& bind, const std::string& prefix, Var x);

void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t features);
/// Normalises each frame (column) of x.
Var layer_norm(ParamBinder& bind, const std::string& prefix, Var x);

inline Var leaky_relu(Var x) { return ops::leaky_relu(x, kLeakySlope); }
inline Var softmax(Var x) { return ops::softmax(x); }

// ---------------------------------------------------------------------------
// Bidirectional recurrence

enum class CellKind { kLstm, kGru };

struct BiRnnSpec {
  CellKind cell = CellKind::kLstm;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;  // per direction
  std::size_t layers = 1;

  std::size_t output_dim() const { return 2 * hidden_dim; }
};

/// Per layer and direction: w_ih (G*h x in), w_hh (G*h x h), b_ih, b_hh
/// (G*h) with G = 4 for LSTM (gates i, f, g, o) and 3 for GRU (r, z, n).
void add_birnn(ParamStore& store, const std::string& prefix, const BiRnnSpec& spec, std::mt19937_64& rng);
/// x: input_dim x K  ->  2*hidden x K; rows [0, h) forward, [h, 2h) backward.
Var birnn(ParamBinder& bind, const std::string& prefix, const BiRnnSpec& spec, Var x);

// ---------------------------------------------------------------------------
// Multi-head self-attention

struct MhsaSpec {
  std::size_t model_dim = 8;  // D/2
  std::size_t heads = 2;

  std::size_t head_dim() const { return model_dim / heads; }
  std::size_t ffn_dim() const { return 3 * model_dim; }
  /// Throws std::invalid_argument unless heads divides model_dim.
  void validate() const;
};

/// ln1.{gain,bias}, head<h>.{w_q,w_k,w_v} (d x D/2), w_p (D/2 x D/2),
/// ln2.{gain,bias}, ffn_in (D/2 -> 3D/2), ffn_out (3D/2 -> D/2).
void add_mhsa(ParamStore& store, const std::string& prefix, const MhsaSpec& spec, std::mt19937_64& rng);

/// Row-stochastic K x K attention of one head over an already normalised
/// input: softmax(d^-1/2 (W_q x)^T (W_k x)) row by row.
Var mhsa_attention(ParamBinder& bind, const std::string& prefix, const MhsaSpec& spec, Var normed,
                   std::size_t head);

/// One attention module:
///   n = LN1(x); E_h = A_h (W_v,h n)^T; E = (concat_h E_h  W_p)^T + x;
///   M = ffn_out(lrelu(ffn_in(LN2(E)))).
/// No residual around the feed-forward part. When `attention` is non-null
/// the per-head maps are appended to it.
Var mhsa_module(ParamBinder& bind, const std::string& prefix, const MhsaSpec& spec, Var x,
                std::vector<Tensor>* attention = nullptr);

}  // namespace sase::nn

#endif  // SASE_NN_LAYERS_HPP_
