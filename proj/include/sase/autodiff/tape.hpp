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

#ifndef SASE_AUTODIFF_TAPE_HPP_
#define SASE_AUTODIFF_TAPE_HPP_

#include <deque>
#include <functional>
#include <vector>

#include "sase/autodiff/tensor.hpp"

namespace sase {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Single-writer record of primitive operations in topological order.
///
/// Nodes are appended by the ops in ops.hpp; a node's parents always have
/// smaller ids. backward() walks the nodes in reverse and accumulates
/// adjoints. Leaves created with parameter() also add their adjoint into an
/// external gradient sink so one sink can collect gradients over many tapes.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (read back with grad()).
  Var variable(Tensor value);
  /// Leaf referencing externally owned storage. `value` must outlive the
  /// tape. With a null sink the leaf behaves as a constant.
  Var parameter(const Tensor& value, Tensor* grad_sink);

  /// Appends an interior node. The backward function is kept only when at
  /// least one parent requires a gradient.
  Var record(Tensor value, std::vector<int> parents, BackwardFn backward);

  /// Reverse sweep from a scalar root. Interior adjoints are reset first;
  /// parameter sinks accumulate.
  void backward(Var root);

  const Tensor& value(int id) const;
  const Tensor& value(Var v) const { return value(v.id()); }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  const std::vector<int>& parents(int id) const { return nodes_.at(id).parents; }

  /// Adjoint of a node after backward(); zeros when none reached it.
  Tensor grad(Var v) const;
  /// Adjoint buffer of a node, allocated to zeros on first use.
  Tensor& grad_buffer(int id);
  bool has_grad(int id) const { return !nodes_.at(id).grad.empty(); }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::vector<int> parents;
    BackwardFn backward;
    Tensor* sink = nullptr;
  };

  void check_owned(Var v, const char* what) const;

  std::deque<Node> nodes_;
};

}  // namespace sase

#endif  // SASE_AUTODIFF_TAPE_HPP_
