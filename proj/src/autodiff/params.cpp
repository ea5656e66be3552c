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

#include "sase/autodiff/params.hpp"

#include <stdexcept>

namespace sase {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate name '" + name + "'");
  index_.emplace(name, values_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no tensor named '" + name + "'");
  return it->second;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor::zeros(values_[i].shape()));
  return out;
}

void ParamStore::set_zero() {
  for (auto& v : values_) v.fill(0.0);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.values_[i] == b.values_[i])) return false;
  return true;
}

}  // namespace sase
