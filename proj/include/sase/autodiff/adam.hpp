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

#ifndef SASE_AUTODIFF_ADAM_HPP_
#define SASE_AUTODIFF_ADAM_HPP_

#include <cstdint>

#include "sase/autodiff/params.hpp"

namespace sase {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers mirror the parameter store they were created from.
struct AdamState {
  AdamState() = default;
  AdamState(const ParamStore& params, double learning_rate, AdamConfig config = {});

  ParamStore first_moment;
  ParamStore second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  AdamConfig config;
};

/// One bias-corrected ADAM update of every parameter. Throws NumericalError
/// naming the first parameter with a non-finite gradient; nothing is
/// modified in that case.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

}  // namespace sase

#endif  // SASE_AUTODIFF_ADAM_HPP_
