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

// Run configuration file. One JSON object with optional sections
//
//   {"data":  {...CorpusConfig...},
//    "train": {"epochs", "learning_rate", "batch_size", "seed",
//              "augment_probability", "checkpoint_every", "protocol",
//              "target_speaker", "close_with_spk"},
//    "model": {...ModelConfig...}, "loss": {"alpha", "beta", "epsilon"},
//    "stft":  {...StftConfig...}}
//
// Missing keys keep their defaults, unknown keys are rejected. Overrides
// are "section.key=value" where value is JSON, or a bare string.

#ifndef SASE_TRAIN_CONFIG_HPP_
#define SASE_TRAIN_CONFIG_HPP_

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "sase/data/corpus.hpp"
#include "sase/objectives/losses.hpp"
#include "sase/train/trainer.hpp"

namespace sase::objectives {
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
}  // namespace sase::objectives

namespace sase::data {
void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);
}  // namespace sase::data

namespace sase::train {

/// Train section together with the model, loss and stft sections.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunConfig {
  data::CorpusConfig data;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Throws DataError on unknown keys or wrong types; validates every section.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Sets `dotted=value` inside `j`, creating objects along the way. Throws
/// std::invalid_argument for a malformed override.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// File (may be empty for defaults) plus overrides, resolved and validated.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace sase::train

#endif  // SASE_TRAIN_CONFIG_HPP_
