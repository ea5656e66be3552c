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

#ifndef SASE_AUTODIFF_PARAMS_HPP_
#define SASE_AUTODIFF_PARAMS_HPP_

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "sase/autodiff/tensor.hpp"

namespace sase {

/// Insertion-ordered collection of named tensors. Element addresses are
/// stable for the lifetime of the store, so tapes may reference them.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  Tensor& get(const std::string& name) { return values_[index_of(name)]; }
  const Tensor& get(const std::string& name) const { return values_[index_of(name)]; }

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  void set_zero();
  std::size_t total_elements() const;

  /// Exact equality of names, order, shapes and payloads.
  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace sase

#endif  // SASE_AUTODIFF_PARAMS_HPP_
