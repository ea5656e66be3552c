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

#include "sase/autodiff/tape.hpp"

#include <stdexcept>
#include <string>

namespace sase {

const Tensor& Var::value() const {
  if (!valid()) throw std::invalid_argument("Var: detached handle");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return valid() && tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(const Tensor& value, Tensor* grad_sink) {
  if (grad_sink != nullptr && grad_sink->shape() != value.shape())
    throw ShapeError("Tape::parameter: gradient sink " + shape_str(grad_sink->shape()) +
                     " does not match value " + shape_str(value.shape()));
  Node n;
  n.external = &value;
  n.requires_grad = grad_sink != nullptr;
  n.sink = grad_sink;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (int p : parents)
    if (nodes_.at(p).requires_grad) n.requires_grad = true;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

Tensor Tape::grad(Var v) const {
  check_owned(v, "grad");
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor::zeros(value(v.id()).shape());
  return n.grad;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor::zeros(value(id).shape());
  return n.grad;
}

void Tape::check_owned(Var v, const char* what) const {
  if (v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size())
    throw std::invalid_argument(std::string("Tape::") + what + ": handle is not on this tape");
}

void Tape::backward(Var root) {
  check_owned(root, "backward");
  if (value(root.id()).size() != 1)
    throw std::invalid_argument("Tape::backward: root must be a scalar, got shape " +
                                shape_str(value(root.id()).shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root.id()].requires_grad) return;

  grad_buffer(root.id())[0] = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.sink != nullptr) {
      double* dst = n.sink->raw();
      const double* src = n.grad.raw();
      for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
    }
  }
}

}  // namespace sase
