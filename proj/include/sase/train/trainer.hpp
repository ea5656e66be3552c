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

// Training loop, evaluation and the three-protocol comparison.
//
// Output directory layout of train() when TrainOptions::out_dir is set:
//
//   report.json        config echo, per-epoch records, selection, test metrics
//   epochs.csv         one row per epoch
//   timings.csv        wall time per epoch (kept apart so report.json is
//                      reproducible bit for bit)
//   model.*            selected model (best dev SI-SDR), see save_model
//   checkpoint/        params.*, adam_m.*, adam_v.*, best.*, state.json;
//                      enough to resume exactly where training stopped
//   test_metrics.csv   per-utterance test metrics plus their mean

#ifndef SASE_TRAIN_TRAINER_HPP_
#define SASE_TRAIN_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sase/autodiff/adam.hpp"
#include "sase/data/corpus.hpp"
#include "sase/model/model.hpp"
#include "sase/objectives/losses.hpp"
#include "sase/objectives/metrics.hpp"

namespace sase::train {

struct TrainConfig {
  std::size_t epochs = 40;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  /// Chance that an item takes part in a noise swap each epoch.
  double augment_probability = 0.5;
  /// Periodic checkpoint interval in epochs; 0 keeps only the final one.
  std::size_t checkpoint_every = 10;
  data::Protocol protocol = data::Protocol::kOpen;
  std::size_t target_speaker = 0;
  /// Adds the speaker branch and its loss to the Close protocol.
  bool close_with_spk = false;
  /// Architecture; `speakers` and `use_spk` are overwritten from the protocol.
  model::ModelConfig model;
  dsp::StftConfig stft;
  objectives::LossConfig loss;

  TrainConfig();
  /// Throws std::invalid_argument.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Constant learning_rate up to epochs/2, then linear down to
/// learning_rate/100 at the last epoch. Epochs count from 1; anything outside
/// [1, epochs] throws std::out_of_range.
double lr_at(std::size_t epoch, const TrainConfig& config);

/// Utterances a run trains on. Class labels index `label_speakers`.
struct TrainData {
  std::vector<data::UtterancePair> train;
  std::vector<data::UtterancePair> dev;
  std::vector<data::UtterancePair> test;
  std::vector<std::size_t> label_speakers;
  bool use_spk = false;

  /// Throws std::out_of_range for a speaker without a label.
  std::size_t label_of(std::size_t speaker) const;
};

/// Loads the WAVs of a protocol split.
TrainData load_protocol_data(const data::Manifest& manifest, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  std::size_t steps = 0;
  objectives::LossBreakdown train_loss;  // mean over utterances
  std::optional<double> dev_si_sdr;       // empty without a dev set

  bool operator==(const EpochRecord&) const;
};

struct TrainReport {
  nlohmann::json config;  // resolved TrainConfig plus run facts
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_dev_si_sdr;
  std::vector<objectives::UtteranceMetrics> test;  // per utterance

  bool operator==(const TrainReport&) const;
};

nlohmann::json report_json(const TrainReport& report);
void write_report(const std::filesystem::path& dir, const TrainReport& report);

/// Passed to TrainOptions::on_batch before each optimiser step.
struct BatchEvent {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::vector<std::string> ids;
  std::vector<std::size_t> speakers;  // corpus speaker of each item's speech
};

struct TrainOptions {
  std::filesystem::path out_dir;      // empty: nothing is written
  std::filesystem::path resume_from;  // a checkpoint/ directory
  /// Stop (after checkpointing) once this epoch finishes; 0 runs to the end.
  std::size_t stop_after_epoch = 0;
  std::function<void(const BatchEvent&)> on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  model::Model model;  // best dev SI-SDR, or the last epoch without a dev set
  model::Model last;   // parameters after the last completed epoch
  AdamState optimizer;
  TrainReport report;
};

/// Model configuration the run actually uses.
model::ModelConfig resolved_model_config(const TrainConfig& config, const TrainData& data);

/// Deterministic given config.seed. Throws NumericalError naming epoch,
/// batch and utterance when the loss or a gradient stops being finite, and
/// std::invalid_argument for an empty training set. Test metrics are filled
/// in when data.test is not empty.
TrainResult train(const TrainData& data, const TrainConfig& config, const TrainOptions& options = {});

/// Forward and backward over one batch, then one ADAM step. Returns the mean
/// loss before the step. Gradients are per-utterance losses averaged.
objectives::LossBreakdown train_step(model::Model& model, AdamState& optimizer,
                                     const std::vector<const data::UtterancePair*>& batch,
                                     const TrainData& data, const objectives::LossConfig& loss);

/// Mean loss of a batch without touching the parameters.
objectives::LossBreakdown batch_loss(const model::Model& model, const std::vector<const data::UtterancePair*>& batch,
                                     const TrainData& data, const objectives::LossConfig& loss);

/// Per-utterance SI-SDR, SDR and SDR loss of the enhanced mixtures.
std::vector<objectives::UtteranceMetrics> evaluate(const model::Model& model,
                                                   const std::vector<data::UtterancePair>& pairs,
                                                   const objectives::LossConfig& loss);

/// The same metrics with the untouched mixture as the estimate.
std::vector<objectives::UtteranceMetrics> evaluate_noisy(const std::vector<data::UtterancePair>& pairs,
                                                         const objectives::LossConfig& loss);

struct ComparisonRow {
  std::string method;
  double si_sdr = 0.0;
  double loss = 0.0;
};

struct VerificationResult {
  std::vector<ComparisonRow> rows;  // Noisy, Close, Open, Open+SPK
  std::vector<TrainReport> reports;  // Close, Open, Open+SPK
};

/// Trains one model per protocol with the same seed and budget and scores
/// each on the target speaker's test utterances. Writes comparison.csv and
/// one sub-directory per protocol when out_dir is not empty.
VerificationResult run_verification_experiment(const data::Manifest& manifest, const TrainConfig& config,
                                               const std::filesystem::path& out_dir = {});

/// Header "Method,SI-SDR,Loss", values with 17 significant digits.
void write_comparison_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows);

}  // namespace sase::train

#endif  // SASE_TRAIN_TRAINER_HPP_
