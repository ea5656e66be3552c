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

// Differentiable primitives. Every function records one node on the tape
// shared by its inputs; mixing inputs from different tapes throws
// std::invalid_argument, incompatible shapes throw ShapeError.
//
// Broadcasting is never implicit: element-wise binary ops require identical
// shapes, and broadcast() expands size-1 axes of an equal-rank tensor.

#ifndef SASE_AUTODIFF_OPS_HPP_
#define SASE_AUTODIFF_OPS_HPP_

#include <cstddef>
#include <utility>
#include <vector>

#include "sase/autodiff/tape.hpp"

namespace sase::ops {

// Element-wise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var square(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log(Var a, double floor = 0.0);
Var leaky_relu(Var a, double slope = 0.01);

/// (m x k) * (k x n).
Var matmul(Var a, Var b);
/// Rank-2 transpose.
Var transpose(Var a);

Var reshape(Var a, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// Reverses the order of entries along `axis`.
Var reverse(Var a, std::size_t axis);
/// Expands size-1 axes to `shape`; ranks must match.
Var broadcast(Var a, const Shape& shape);

/// Sum / mean over all entries, result shape {1}.
Var sum(Var a);
Var mean(Var a);
/// Reductions along one axis; the reduced axis is kept with extent 1.
Var sum_axis(Var a, std::size_t axis);
Var mean_axis(Var a, std::size_t axis);

/// Numerically stable softmax over the last axis (rank 1 or 2).
Var softmax(Var a);

/// Cross-correlation of x (C_in x H x W) with w (C_out x C_in x kh x kw)
/// plus per-channel bias b (C_out), zero padding.
Var conv2d(Var x, Var w, Var b, std::pair<std::size_t, std::size_t> padding,
           std::pair<std::size_t, std::size_t> stride);

/// Per-channel normalisation of x (C x H x W) over its H x W plane followed
/// by the affine map scale[c] * xhat + shift[c].
Var instance_norm(Var x, Var scale, Var shift, double eps = 1e-5);

/// Normalises every column of x (N x K) over its N entries followed by
/// gain[n] * xhat + bias[n].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace sase::ops

#endif  // SASE_AUTODIFF_OPS_HPP_
