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

#include "sase/model/io.hpp"

#include <fstream>
#include <set>

#include "sase/autodiff/checkpoint.hpp"

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

std::string cell_name(nn::CellKind c) { return c == nn::CellKind::kLstm ? "lstm" : "gru"; }

}  // namespace

namespace model {

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"feature_dim", c.feature_dim},
       {"heads", c.heads},
       {"freq_bins", c.freq_bins},
       {"speakers", c.speakers},
       {"cnn_channels", c.cnn_channels},
       {"spk_channels", c.spk_channels},
       {"recurrent_layers", c.recurrent_layers},
       {"attention_modules", c.attention_modules},
       {"use_cnn", c.use_cnn},
       {"use_spk", c.use_spk},
       {"cell", cell_name(c.cell)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  constexpr const char* s = "model";
  reject_unknown(j,
                 {"feature_dim", "heads", "freq_bins", "speakers", "cnn_channels", "spk_channels",
                  "recurrent_layers", "attention_modules", "use_cnn", "use_spk", "cell"},
                 s);
  read(j, "feature_dim", c.feature_dim, s);
  read(j, "heads", c.heads, s);
  read(j, "freq_bins", c.freq_bins, s);
  read(j, "speakers", c.speakers, s);
  read(j, "cnn_channels", c.cnn_channels, s);
  read(j, "spk_channels", c.spk_channels, s);
  read(j, "recurrent_layers", c.recurrent_layers, s);
  read(j, "attention_modules", c.attention_modules, s);
  read(j, "use_cnn", c.use_cnn, s);
  read(j, "use_spk", c.use_spk, s);
  if (j.contains("cell")) {
    std::string cell;
    read(j, "cell", cell, s);
    if (cell == "lstm")
      c.cell = nn::CellKind::kLstm;
    else if (cell == "gru")
      c.cell = nn::CellKind::kGru;
    else
      throw DataError("model.cell: expected \"lstm\" or \"gru\", got \"" + cell + "\"");
  }
}

}  // namespace model

namespace dsp {

void to_json(nlohmann::json& j, const StftConfig& c) {
  j = {{"dft_size", c.dft_size}, {"hop", c.hop}, {"window_length", c.window_length}, {"window", "blackman"}};
}

void from_json(const nlohmann::json& j, StftConfig& c) {
  constexpr const char* s = "stft";
  reject_unknown(j, {"dft_size", "hop", "window_length", "window"}, s);
  read(j, "dft_size", c.dft_size, s);
  read(j, "hop", c.hop, s);
  read(j, "window_length", c.window_length, s);
  if (j.contains("window") && j.at("window") != "blackman")
    throw DataError("stft.window: only \"blackman\" is supported");
}

}  // namespace dsp

namespace model {

void check_params(const ModelConfig& config, const ParamStore& params) {
  const ParamStore expected = init_params(config, 0);
  if (expected.names() != params.names())
    throw DataError("parameter names do not match the model configuration (" + std::to_string(params.size()) +
                    " stored, " + std::to_string(expected.size()) + " expected)");
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (expected.value(i).shape() != params.value(i).shape())
      throw DataError("parameter " + expected.names()[i] + " has shape " + shape_str(params.value(i).shape()) +
                      ", configuration expects " + shape_str(expected.value(i).shape()));
}

void save_model(const std::filesystem::path& stem, const Model& m) {
  save_tensors(stem, m.params);
  const auto& mean = m.norm.mean.data();
  const auto& var = m.norm.variance.data();
  nlohmann::json j = {{"model", m.config},
                      {"stft", m.stft},
                      {"norm",
                       {{"mean", std::vector<double>(mean.begin(), mean.end())},
                        {"variance", std::vector<double>(var.begin(), var.end())}}}};
  std::filesystem::path path = stem;
  path += ".model.json";
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

Model load_model(const std::filesystem::path& stem) {
  std::filesystem::path path = stem;
  path += ".model.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model description " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  Model m;
  try {
    reject_unknown(j, {"model", "stft", "norm"}, "model file");
    m.config = j.at("model").get<ModelConfig>();
    m.stft = j.at("stft").get<dsp::StftConfig>();
    const auto mean = j.at("norm").at("mean").get<std::vector<double>>();
    const auto var = j.at("norm").at("variance").get<std::vector<double>>();
    if (mean.size() != m.config.freq_bins || var.size() != m.config.freq_bins)
      throw DataError(path.string() + ": normalisation statistics do not have " +
                      std::to_string(m.config.freq_bins) + " entries");
    m.norm = {Tensor({mean.size()}, mean), Tensor({var.size()}, var)};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  try {
    m.config.validate();
    m.stft.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (m.stft.num_bins() != m.config.freq_bins)
    throw DataError(path.string() + ": STFT bins and model frequency bins disagree");
  m.params = load_tensors(stem);
  check_params(m.config, m.params);
  return m;
}

}  // namespace model
}  // namespace sase
