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

#include "sase/train/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "sase/autodiff/tensor.hpp"
#include "sase/model/io.hpp"

namespace sase {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* section) {
  if (!j.is_object()) throw DataError(std::string(section) + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (known.count(key) == 0) throw DataError(std::string(section) + ": unknown key '" + key + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace

namespace objectives {

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"alpha", c.alpha}, {"beta", c.beta}, {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  constexpr const char* s = "loss";
  reject_unknown(j, {"alpha", "beta", "epsilon"}, s);
  read(j, "alpha", c.alpha, s);
  read(j, "beta", c.beta, s);
  read(j, "epsilon", c.epsilon, s);
}

}  // namespace objectives

namespace data {

void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"speakers", c.speakers},         {"per_speaker", c.per_speaker},   {"snr_db", c.snr_db},
       {"min_seconds", c.min_seconds},   {"max_seconds", c.max_seconds},   {"sample_rate", c.sample_rate},
       {"dev_fraction", c.dev_fraction}, {"test_fraction", c.test_fraction}, {"f0_margin", c.f0_margin},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
  constexpr const char* s = "data";
  reject_unknown(j,
                 {"speakers", "per_speaker", "snr_db", "min_seconds", "max_seconds", "sample_rate", "dev_fraction",
                  "test_fraction", "f0_margin", "seed"},
                 s);
  read(j, "speakers", c.speakers, s);
  read(j, "per_speaker", c.per_speaker, s);
  read(j, "snr_db", c.snr_db, s);
  read(j, "min_seconds", c.min_seconds, s);
  read(j, "max_seconds", c.max_seconds, s);
  read(j, "sample_rate", c.sample_rate, s);
  read(j, "dev_fraction", c.dev_fraction, s);
  read(j, "test_fraction", c.test_fraction, s);
  read(j, "f0_margin", c.f0_margin, s);
  read(j, "seed", c.seed, s);
}

}  // namespace data

namespace train {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"train",
        {{"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"augment_probability", c.augment_probability},
         {"checkpoint_every", c.checkpoint_every},
         {"protocol", data::protocol_name(c.protocol)},
         {"target_speaker", c.target_speaker},
         {"close_with_spk", c.close_with_spk}}},
       {"model", c.model},
       {"loss", c.loss},
       {"stft", c.stft}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<model::ModelConfig>();
  if (j.contains("loss")) c.loss = j.at("loss").get<objectives::LossConfig>();
  if (j.contains("stft")) c.stft = j.at("stft").get<dsp::StftConfig>();
  if (!j.contains("train")) return;
  const auto& t = j.at("train");
  constexpr const char* s = "train";
  reject_unknown(t,
                 {"epochs", "learning_rate", "batch_size", "seed", "augment_probability", "checkpoint_every",
                  "protocol", "target_speaker", "close_with_spk"},
                 s);
  read(t, "epochs", c.epochs, s);
  read(t, "learning_rate", c.learning_rate, s);
  read(t, "batch_size", c.batch_size, s);
  read(t, "seed", c.seed, s);
  read(t, "augment_probability", c.augment_probability, s);
  read(t, "checkpoint_every", c.checkpoint_every, s);
  read(t, "target_speaker", c.target_speaker, s);
  read(t, "close_with_spk", c.close_with_spk, s);
  if (t.contains("protocol")) {
    std::string name;
    read(t, "protocol", name, s);
    try {
      c.protocol = data::parse_protocol(name);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("train.protocol: ") + e.what());
    }
  }
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = config.train;
  j["data"] = config.data;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"data", "train", "model", "loss", "stft"}, "config");
  RunConfig c;
  c.train = j.get<TrainConfig>();
  if (j.contains("data")) c.data = j.at("data").get<data::CorpusConfig>();
  c.data.validate();
  c.train.validate();
  return c;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw std::invalid_argument("override key '" + key + "' descends into a non-object");
      *node = nlohmann::json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace train
}  // namespace sase
