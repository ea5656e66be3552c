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

// Tensor container on disk: `<stem>.bin` holds a sequence of records
//
//   magic "SASETNSR" | u32 version | u32 record count
//   per record: u32 name length | name bytes | u32 rank | u64 dims[rank] |
//               f64 payload[numel]
//
// all little-endian, and `<stem>.json` is an index giving each record's
// name, shape and the byte offset of its payload. Round trips are bit-exact.

#ifndef SASE_AUTODIFF_CHECKPOINT_HPP_
#define SASE_AUTODIFF_CHECKPOINT_HPP_

#include <filesystem>

#include "sase/autodiff/params.hpp"

namespace sase {

void save_tensors(const std::filesystem::path& stem, const ParamStore& tensors);
ParamStore load_tensors(const std::filesystem::path& stem);

}  // namespace sase

#endif  // SASE_AUTODIFF_CHECKPOINT_HPP_
