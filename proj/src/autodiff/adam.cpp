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

#include "sase/autodiff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sase {

AdamState::AdamState(const ParamStore& params, double lr, AdamConfig cfg)
    : first_moment(params.zeros_like()),
      second_moment(params.zeros_like()),
      learning_rate(lr),
      config(cfg) {}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  if (!(state.learning_rate > 0.0))
    throw std::invalid_argument("adam_step: learning rate must be positive");
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment stores differ in size");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.value(i).shape() != params.value(i).shape() ||
        state.first_moment.value(i).shape() != params.value(i).shape())
      throw ShapeError("adam_step: shape mismatch for '" + params.names()[i] + "' " +
                       shape_str(params.value(i).shape()) + " vs gradient " +
                       shape_str(grads.value(i).shape()));
    if (!grads.value(i).all_finite())
      throw NumericalError("adam_step: non-finite gradient in parameter '" + params.names()[i] + "'");
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params.value(i).raw();
    const double* g = grads.value(i).raw();
    double* m = state.first_moment.value(i).raw();
    double* v = state.second_moment.value(i).raw();
    const std::size_t n = params.value(i).size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace sase
