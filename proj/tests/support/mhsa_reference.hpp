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

// Straight-line reference for the attention module: plain loops over a
// row-major matrix type, no tape and no Eigen.

#ifndef SASE_TESTS_SUPPORT_MHSA_REFERENCE_HPP_
#define SASE_TESTS_SUPPORT_MHSA_REFERENCE_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sase/autodiff/params.hpp"
#include "sase/nn/layers.hpp"

namespace sase::testing {

// Plain row-major matrix for the straight-line references below.
struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> v;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), v(rows * cols, 0.0) {}
  explicit Mat(const Tensor& t) : r(t.dim(0)), c(t.dim(1)), v(t.data().begin(), t.data().end()) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * c + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

inline Mat mm(const Mat& a, const Mat& b) {
  Mat out(a.r, b.c);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < b.c; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.c; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline Mat tr(const Mat& a) {
  Mat out(a.c, a.r);
  for (std::size_t i = 0; i < a.r; ++i)
    for (std::size_t j = 0; j < a.c; ++j) out(j, i) = a(i, j);
  return out;
}

inline Mat col_layer_norm(const Mat& x, const Tensor& gain, const Tensor& bias) {
  Mat out(x.r, x.c);
  for (std::size_t j = 0; j < x.c; ++j) {
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < x.r; ++i) mu += x(i, j);
    mu /= x.r;
    for (std::size_t i = 0; i < x.r; ++i) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= x.r;
    for (std::size_t i = 0; i < x.r; ++i) out(i, j) = gain[i] * (x(i, j) - mu) / std::sqrt(var + 1e-5) + bias[i];
  }
  return out;
}

inline Mat row_softmax(const Mat& x) {
  Mat out(x.r, x.c);
  for (std::size_t i = 0; i < x.r; ++i) {
    double m = x(i, 0);
    for (std::size_t j = 1; j < x.c; ++j) m = std::max(m, x(i, j));
    double z = 0;
    for (std::size_t j = 0; j < x.c; ++j) z += std::exp(x(i, j) - m);
    for (std::size_t j = 0; j < x.c; ++j) out(i, j) = std::exp(x(i, j) - m) / z;
  }
  return out;
}

inline Mat affine(const Tensor& w, const Tensor& b, const Mat& x) {
  Mat out = mm(Mat(w), x);
  for (std::size_t i = 0; i < out.r; ++i)
    for (std::size_t j = 0; j < out.c; ++j) out(i, j) += b[i];
  return out;
}

/// Attention module output, D x K; `maps` receives each head's K x K map.
inline Mat reference_mhsa(const ParamStore& p, const std::string& pre, const nn::MhsaSpec& spec, const Mat& x,
                   std::vector<Mat>* maps = nullptr) {
  const Mat n = col_layer_norm(x, p.get(pre + ".ln1.gain"), p.get(pre + ".ln1.bias"));
  const std::size_t k = x.c, d = spec.head_dim();
  Mat cat(k, spec.model_dim);
  for (std::size_t h = 0; h < spec.heads; ++h) {
    const std::string hp = pre + ".head" + std::to_string(h);
    Mat scores = mm(tr(mm(Mat(p.get(hp + ".w_q")), n)), mm(Mat(p.get(hp + ".w_k")), n));
    for (double& s : scores.v) s /= std::sqrt(static_cast<double>(d));
    const Mat a = row_softmax(scores);
    if (maps != nullptr) maps->push_back(a);
    const Mat e = mm(a, tr(mm(Mat(p.get(hp + ".w_v")), n)));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j) cat(i, h * d + j) = e(i, j);
  }
  Mat e = tr(mm(cat, Mat(p.get(pre + ".w_p"))));
  for (std::size_t i = 0; i < e.v.size(); ++i) e.v[i] += x.v[i];
  Mat hid = affine(p.get(pre + ".ffn_in.weight"), p.get(pre + ".ffn_in.bias"),
                   col_layer_norm(e, p.get(pre + ".ln2.gain"), p.get(pre + ".ln2.bias")));
  for (double& v : hid.v) v = v >= 0 ? v : 0.01 * v;
  return affine(p.get(pre + ".ffn_out.weight"), p.get(pre + ".ffn_out.bias"), hid);
}

}  // namespace sase::testing

#endif  // SASE_TESTS_SUPPORT_MHSA_REFERENCE_HPP_
