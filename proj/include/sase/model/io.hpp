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

// JSON forms of the model and STFT settings, and the on-disk model layout:
//
//   <stem>.bin, <stem>.json   parameter tensors (see checkpoint.hpp)
//   <stem>.model.json         {"model": {...}, "stft": {...},
//                              "norm": {"mean": [...], "variance": [...]}}

#ifndef SASE_MODEL_IO_HPP_
#define SASE_MODEL_IO_HPP_

#include <filesystem>
#include <json.hpp>

#include "sase/model/model.hpp"

namespace sase::model {

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys throw DataError.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace sase::model

namespace sase::dsp {

void to_json(nlohmann::json& j, const StftConfig& c);
void from_json(const nlohmann::json& j, StftConfig& c);

}  // namespace sase::dsp

namespace sase::model {

void save_model(const std::filesystem::path& stem, const Model& model);
/// Throws DataError when files are missing, malformed, or the parameters do
/// not match the stored configuration.
Model load_model(const std::filesystem::path& stem);

/// Throws DataError unless `params` has exactly the names and shapes that
/// `config` produces.
void check_params(const ModelConfig& config, const ParamStore& params);

}  // namespace sase::model

#endif  // SASE_MODEL_IO_HPP_
