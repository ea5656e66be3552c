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

#include "sase/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace sase::nn {

using ops::add;
using ops::broadcast;
using ops::concat;
using ops::matmul;
using ops::mul;
using ops::reshape;
using ops::slice;

ParamBinder::ParamBinder(Tape& tape, const ParamStore& params, ParamStore* grads)
    : tape_(tape), params_(params), grads_(grads), leaf_(params.size(), -1) {
  if (grads_ != nullptr && grads_->size() != params_.size())
    throw std::invalid_argument("ParamBinder: gradient store does not mirror the parameters");
}

Var ParamBinder::operator()(const std::string& name) {
  const std::size_t i = params_.index_of(name);
  if (leaf_[i] < 0) {
    Tensor* sink = grads_ != nullptr ? &grads_->value(i) : nullptr;
    leaf_[i] = tape_.parameter(params_.value(i), sink).id();
  }
  return {&tape_, leaf_[i]};
}

// ---------------------------------------------------------------------------

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, double gain, std::mt19937_64& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

double leaky_relu_gain(double slope) { return std::sqrt(2.0 / (1.0 + slope * slope)); }

Tensor orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  Tensor t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return t;
}

// ---------------------------------------------------------------------------

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng, bool bias) {
  store.add(prefix + ".weight", kaiming_uniform({out, in}, in, leaky_relu_gain(), rng));
  if (bias) store.add(prefix + ".bias", Tensor::zeros({out}));
}

namespace {

/// Adds a per-row bias vector (N) to every column of x (N x K).
Var add_row_bias(Var x, Var b) {
  const std::size_t n = b.dim(0);
  return add(x, broadcast(reshape(b, {n, 1}), x.shape()));
}

}  // namespace

Var linear(ParamBinder& bind, const std::string& prefix, Var x, bool bias) {
  Var y = matmul(bind(prefix + ".weight"), x);
  return bias ? add_row_bias(y, bind(prefix + ".bias")) : y;
}

void add_conv2d(ParamStore& store, const std::string& prefix, const Conv2dSpec& spec, std::mt19937_64& rng) {
  const std::size_t fan_in = spec.in_channels * spec.kernel * spec.kernel;
  store.add(prefix + ".weight",
            kaiming_uniform({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}, fan_in,
                            leaky_relu_gain(), rng));
  store.add(prefix + ".bias", Tensor::zeros({spec.out_channels}));
}

Var conv2d(ParamBinder& bind, const std::string& prefix, const Conv2dSpec& spec, Var x) {
  return ops::conv2d(x, bind(prefix + ".weight"), bind(prefix + ".bias"), spec.padding, spec.stride);
}

void add_instance_norm(ParamStore& store, const std::string& prefix, std::size_t channels) {
  store.add(prefix + ".scale", Tensor::full({channels}, 1.0));
  store.add(prefix + ".shift", Tensor::zeros({channels}));
}

Var instance_norm(ParamBinder& bind, const std::string& prefix, Var x) {
  return ops::instance_norm(x, bind(prefix + ".scale"), bind(prefix + ".shift"));
}

void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t features) {
  store.add(prefix + ".gain", Tensor::full({features}, 1.0));
  store.add(prefix + ".bias", Tensor::zeros({features}));
}

Var layer_norm(ParamBinder& bind, const std::string& prefix, Var x) {
  return ops::layer_norm(x, bind(prefix + ".gain"), bind(prefix + ".bias"));
}

// ---------------------------------------------------------------------------

namespace {

std::size_t gate_count(CellKind cell) { return cell == CellKind::kLstm ? 4 : 3; }

std::string direction_prefix(const std::string& prefix, std::size_t layer, bool backward) {
  return prefix + ".l" + std::to_string(layer) + (backward ? ".bwd" : ".fwd");
}

/// Runs one direction over the columns of `proj` (G*h x K), which already
/// holds W_ih x + b_ih for every frame. Returns h x K.
Var run_direction(ParamBinder& bind, const std::string& p, CellKind cell, std::size_t hidden, Var proj) {
  Tape& tape = bind.tape();
  const std::size_t frames = proj.dim(1);
  const std::size_t g = gate_count(cell) * hidden;
  Var w_hh = bind(p + ".w_hh");
  Var b_hh = reshape(bind(p + ".b_hh"), {g, 1});
  Var h = tape.constant(Tensor::zeros({hidden, 1}));
  Var c = h;
  std::vector<Var> outputs;
  outputs.reserve(frames);
  auto part = [&](Var v, std::size_t k) { return slice(v, 0, k * hidden, (k + 1) * hidden); };
  for (std::size_t t = 0; t < frames; ++t) {
    Var xt = slice(proj, 1, t, t + 1);
    Var rec = add(matmul(w_hh, h), b_hh);
    if (cell == CellKind::kLstm) {
      Var gates = add(xt, rec);
      Var i = ops::sigmoid(part(gates, 0));
      Var f = ops::sigmoid(part(gates, 1));
      Var cand = ops::tanh(part(gates, 2));
      Var o = ops::sigmoid(part(gates, 3));
      c = add(mul(f, c), mul(i, cand));
      h = mul(o, ops::tanh(c));
    } else {
      Var r = ops::sigmoid(add(part(xt, 0), part(rec, 0)));
      Var z = ops::sigmoid(add(part(xt, 1), part(rec, 1)));
      Var n = ops::tanh(add(part(xt, 2), mul(r, part(rec, 2))));
      h = add(n, mul(z, ops::sub(h, n)));
    }
    outputs.push_back(h);
  }
  return concat(outputs, 1);
}

}  // namespace

void add_birnn(ParamStore& store, const std::string& prefix, const BiRnnSpec& spec, std::mt19937_64& rng) {
  if (spec.layers == 0 || spec.hidden_dim == 0 || spec.input_dim == 0)
    throw std::invalid_argument("add_birnn: input, hidden and layer counts must be positive");
  const std::size_t h = spec.hidden_dim;
  const std::size_t gates = gate_count(spec.cell);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t layer = 0; layer < spec.layers; ++layer) {
    const std::size_t in = layer == 0 ? spec.input_dim : 2 * h;
    for (bool backward : {false, true}) {
      const std::string p = direction_prefix(prefix, layer, backward);
      Tensor w_ih = Tensor::zeros({gates * h, in});
      for (double& v : w_ih.data()) v = u(rng);
      Tensor w_hh = Tensor::zeros({gates * h, h});
      for (std::size_t k = 0; k < gates; ++k) {
        const Tensor q = orthogonal(h, rng);
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < h; ++j) w_hh.at(k * h + i, j) = q.at(i, j);
      }
      store.add(p + ".w_ih", std::move(w_ih));
      store.add(p + ".w_hh", std::move(w_hh));
      store.add(p + ".b_ih", Tensor::zeros({gates * h}));
      store.add(p + ".b_hh", Tensor::zeros({gates * h}));
    }
  }
}

Var birnn(ParamBinder& bind, const std::string& prefix, const BiRnnSpec& spec, Var x) {
  if (x.shape().size() != 2 || x.dim(0) != spec.input_dim)
    throw ShapeError("birnn: expected input " + std::to_string(spec.input_dim) + " x K, got " +
                     shape_str(x.shape()));
  Var layer_in = x;
  for (std::size_t layer = 0; layer < spec.layers; ++layer) {
    std::vector<Var> directions;
    for (bool backward : {false, true}) {
      const std::string p = direction_prefix(prefix, layer, backward);
      Var seq = backward ? ops::reverse(layer_in, 1) : layer_in;
      Var proj = add_row_bias(matmul(bind(p + ".w_ih"), seq), bind(p + ".b_ih"));
      Var out = run_direction(bind, p, spec.cell, spec.hidden_dim, proj);
      directions.push_back(backward ? ops::reverse(out, 1) : out);
    }
    layer_in = concat(directions, 0);
  }
  return layer_in;
}

// ---------------------------------------------------------------------------

void MhsaSpec::validate() const {
  if (heads == 0 || model_dim == 0 || model_dim % heads != 0)
    throw std::invalid_argument("MhsaSpec: " + std::to_string(heads) + " heads do not divide model width " +
                                std::to_string(model_dim));
}

void add_mhsa(ParamStore& store, const std::string& prefix, const MhsaSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const std::size_t dm = spec.model_dim;
  const std::size_t d = spec.head_dim();
  add_layer_norm(store, prefix + ".ln1", dm);
  for (std::size_t h = 0; h < spec.heads; ++h) {
    const std::string p = prefix + ".head" + std::to_string(h);
    store.add(p + ".w_q", kaiming_uniform({d, dm}, dm, 1.0, rng));
    store.add(p + ".w_k", kaiming_uniform({d, dm}, dm, 1.0, rng));
    store.add(p + ".w_v", kaiming_uniform({d, dm}, dm, 1.0, rng));
  }
  store.add(prefix + ".w_p", kaiming_uniform({dm, dm}, dm, 1.0, rng));
  add_layer_norm(store, prefix + ".ln2", dm);
  add_linear(store, prefix + ".ffn_in", dm, spec.ffn_dim(), rng);
  add_linear(store, prefix + ".ffn_out", spec.ffn_dim(), dm, rng);
}

Var mhsa_attention(ParamBinder& bind, const std::string& prefix, const MhsaSpec& spec, Var normed,
                   std::size_t head) {
  const std::string p = prefix + ".head" + std::to_string(head);
  Var q = matmul(bind(p + ".w_q"), normed);
  Var k = matmul(bind(p + ".w_k"), normed);
  Var scores = ops::scale(matmul(ops::transpose(q), k), 1.0 / std::sqrt(static_cast<double>(spec.head_dim())));
  return ops::softmax(scores);
}

Var mhsa_module(ParamBinder& bind, const std::string& prefix, const MhsaSpec& spec, Var x,
                std::vector<Tensor>* attention) {
  spec.validate();
  if (x.shape().size() != 2 || x.dim(0) != spec.model_dim)
    throw ShapeError("mhsa_module: expected input " + std::to_string(spec.model_dim) + " x K, got " +
                     shape_str(x.shape()));
  Var normed = layer_norm(bind, prefix + ".ln1", x);
  std::vector<Var> contexts;
  for (std::size_t h = 0; h < spec.heads; ++h) {
    Var a = mhsa_attention(bind, prefix, spec, normed, h);
    if (attention != nullptr) attention->push_back(a.value());
    Var v = matmul(bind(prefix + ".head" + std::to_string(h) + ".w_v"), normed);
    contexts.push_back(matmul(a, ops::transpose(v)));
  }
  Var mixed = matmul(concat(contexts, 1), bind(prefix + ".w_p"));
  Var e = add(ops::transpose(mixed), x);
  Var hidden = leaky_relu(linear(bind, prefix + ".ffn_in", layer_norm(bind, prefix + ".ln2", e)));
  return linear(bind, prefix + ".ffn_out", hidden);
}

}  // namespace sase::nn
