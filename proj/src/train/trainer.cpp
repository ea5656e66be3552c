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

#include "sase/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "sase/autodiff/checkpoint.hpp"
#include "sase/dsp/stft.hpp"
#include "sase/model/io.hpp"
#include "sase/nn/layers.hpp"
#include "sase/train/config.hpp"

namespace sase::train {
namespace {

namespace fs = std::filesystem;
using objectives::LossBreakdown;
using objectives::UtteranceMetrics;

// Streams of the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kBatchStream = 3;

bool same(const LossBreakdown& a, const LossBreakdown& b) {
  return a.total == b.total && a.sdr_speech == b.sdr_speech && a.sdr_noise == b.sdr_noise &&
         a.cross_entropy == b.cross_entropy && a.alpha == b.alpha;
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x, double weight) {
  sum.total += weight * x.total;
  sum.sdr_speech += weight * x.sdr_speech;
  sum.sdr_noise += weight * x.sdr_noise;
  sum.cross_entropy += weight * x.cross_entropy;
}

nlohmann::json loss_json(const LossBreakdown& b) {
  return {{"total", b.total},
          {"sdr_speech", b.sdr_speech},
          {"sdr_noise", b.sdr_noise},
          {"cross_entropy", b.cross_entropy},
          {"alpha", b.alpha}};
}

LossBreakdown loss_from_json(const nlohmann::json& j) {
  LossBreakdown b;
  b.total = j.at("total").get<double>();
  b.sdr_speech = j.at("sdr_speech").get<double>();
  b.sdr_noise = j.at("sdr_noise").get<double>();
  b.cross_entropy = j.at("cross_entropy").get<double>();
  b.alpha = j.at("alpha").get<double>();
  return b;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json epoch_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"learning_rate", r.learning_rate},
          {"steps", r.steps},
          {"train_loss", loss_json(r.train_loss)},
          {"dev_si_sdr", optional_json(r.dev_si_sdr)}};
}

EpochRecord epoch_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.steps = j.at("steps").get<std::size_t>();
  r.train_loss = loss_from_json(j.at("train_loss"));
  r.dev_si_sdr = optional_from_json(j.at("dev_si_sdr"));
  return r;
}

nlohmann::json metrics_json(const UtteranceMetrics& m) {
  return {{"id", m.id},     {"si_sdr", m.si_sdr},         {"sdr", m.sdr},
          {"loss", m.loss}, {"loss_sdr", m.loss_sdr}, {"cross_entropy", m.cross_entropy}};
}

Tensor signal(const std::vector<double>& v) { return Tensor({v.size()}, v); }

dsp::NormStats corpus_norm(const std::vector<data::UtterancePair>& pairs, const dsp::StftConfig& stft) {
  std::vector<Tensor> features;
  features.reserve(pairs.size());
  for (const auto& p : pairs) features.push_back(dsp::log_amplitude_features(dsp::stft(p.mixture, stft)));
  return dsp::compute_norm_stats(features);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct Progress {
  std::size_t epoch = 0;  // last completed
  std::size_t best_epoch = 0;
  std::optional<double> best_dev;
  ParamStore best;
  std::vector<EpochRecord> records;
};

void save_checkpoint(const fs::path& dir, const model::Model& m, const AdamState& opt, const Progress& p,
                     const nlohmann::json& config) {
  fs::create_directories(dir);
  save_tensors(dir / "params", m.params);
  save_tensors(dir / "adam_m", opt.first_moment);
  save_tensors(dir / "adam_v", opt.second_moment);
  save_tensors(dir / "best", p.best);
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : p.records) records.push_back(epoch_json(r));
  const auto& mean = m.norm.mean.storage();
  const auto& var = m.norm.variance.storage();
  nlohmann::json state = {{"config", config},
                          {"epoch", p.epoch},
                          {"adam_step", opt.step},
                          {"best_epoch", p.best_epoch},
                          {"best_dev_si_sdr", optional_json(p.best_dev)},
                          {"norm", {{"mean", mean}, {"variance", var}}},
                          {"epochs", records}};
  write_text(dir / "state.json", state.dump(2) + "\n");
}

void load_checkpoint(const fs::path& dir, model::Model& m, AdamState& opt, Progress& p,
                     const nlohmann::json& config) {
  const nlohmann::json state = read_json(dir / "state.json");
  try {
    if (state.at("config") != config)
      throw DataError("checkpoint " + dir.string() + " was written for a different configuration");
    ParamStore params = load_tensors(dir / "params");
    ParamStore first = load_tensors(dir / "adam_m");
    ParamStore second = load_tensors(dir / "adam_v");
    ParamStore best = load_tensors(dir / "best");
    model::check_params(m.config, params);
    model::check_params(m.config, first);
    model::check_params(m.config, second);
    model::check_params(m.config, best);
    m.params = std::move(params);
    opt.first_moment = std::move(first);
    opt.second_moment = std::move(second);
    opt.step = state.at("adam_step").get<std::uint64_t>();
    const auto mean = state.at("norm").at("mean").get<std::vector<double>>();
    const auto var = state.at("norm").at("variance").get<std::vector<double>>();
    m.norm = {Tensor({mean.size()}, mean), Tensor({var.size()}, var)};
    p.best = std::move(best);
    p.epoch = state.at("epoch").get<std::size_t>();
    p.best_epoch = state.at("best_epoch").get<std::size_t>();
    p.best_dev = optional_from_json(state.at("best_dev_si_sdr"));
    p.records.clear();
    for (const auto& r : state.at("epochs")) p.records.push_back(epoch_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + "/state.json: " + e.what());
  }
}

double mean_si_sdr(const std::vector<UtteranceMetrics>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.si_sdr;
  return s / static_cast<double>(rows.size());
}

}  // namespace

TrainConfig::TrainConfig() {
  model.feature_dim = 128;
  model.heads = 4;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("TrainConfig: " + why); };
  if (epochs == 0) fail("epochs must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (batch_size == 0) fail("batch size must be positive");
  if (!(augment_probability >= 0.0 && augment_probability <= 1.0)) fail("augment probability must lie in [0, 1]");
  stft.validate();
  loss.validate();
  model::ModelConfig m = model;
  m.use_spk = false;
  m.validate();
  if (stft.num_bins() != model.freq_bins)
    fail("model.freq_bins = " + std::to_string(model.freq_bins) + " but the STFT gives " +
         std::to_string(stft.num_bins()) + " bins");
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  if (epoch < 1 || epoch > config.epochs)
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [1, " +
                            std::to_string(config.epochs) + "]");
  const double lr0 = config.learning_rate, lr_end = lr0 / 100.0;
  const std::size_t knee = config.epochs / 2;
  if (epoch <= knee || config.epochs == 1) return lr0;
  const double t = static_cast<double>(epoch - knee) / static_cast<double>(config.epochs - knee);
  return lr0 + t * (lr_end - lr0);
}

std::size_t TrainData::label_of(std::size_t speaker) const {
  const auto it = std::find(label_speakers.begin(), label_speakers.end(), speaker);
  if (it == label_speakers.end()) throw std::out_of_range("speaker " + std::to_string(speaker) + " has no class label");
  return static_cast<std::size_t>(it - label_speakers.begin());
}

TrainData load_protocol_data(const data::Manifest& manifest, const TrainConfig& config) {
  const data::ProtocolSplit split = data::protocol_split(manifest, config.protocol, config.target_speaker);
  TrainData d;
  for (const auto& e : split.train) d.train.push_back(data::load_pair(manifest, e));
  for (const auto& e : split.dev) d.dev.push_back(data::load_pair(manifest, e));
  for (const auto& e : split.test) d.test.push_back(data::load_pair(manifest, e));
  d.use_spk = split.use_spk || (config.protocol == data::Protocol::kClose && config.close_with_spk);
  // a single-speaker Close run still needs a distribution to classify over
  d.label_speakers = config.protocol == data::Protocol::kClose && d.use_spk ? manifest.speakers() : split.train_speakers;
  return d;
}

model::ModelConfig resolved_model_config(const TrainConfig& config, const TrainData& data) {
  model::ModelConfig m = config.model;
  m.use_spk = data.use_spk;
  m.speakers = std::max<std::size_t>(data.label_speakers.size(), 2);
  return m;
}

bool EpochRecord::operator==(const EpochRecord& o) const {
  return epoch == o.epoch && learning_rate == o.learning_rate && steps == o.steps &&
         same(train_loss, o.train_loss) && dev_si_sdr == o.dev_si_sdr;
}

bool TrainReport::operator==(const TrainReport& o) const {
  return config == o.config && epochs == o.epochs && best_epoch == o.best_epoch &&
         best_dev_si_sdr == o.best_dev_si_sdr && test == o.test;
}

nlohmann::json report_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array(), test = nlohmann::json::array();
  for (const auto& e : r.epochs) epochs.push_back(epoch_json(e));
  for (const auto& m : r.test) test.push_back(metrics_json(m));
  nlohmann::json j = {{"config", r.config},
                      {"epochs_run", r.epochs.size()},
                      {"epochs", epochs},
                      {"best_epoch", r.best_epoch},
                      {"best_dev_si_sdr", optional_json(r.best_dev_si_sdr)},
                      {"test", test}};
  if (!r.test.empty()) j["test_mean"] = metrics_json(objectives::aggregate(r.test));
  return j;
}

void write_report(const fs::path& dir, const TrainReport& report) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(report).dump(2) + "\n");
  std::string csv = "epoch,learning_rate,steps,loss,sdr_speech,sdr_noise,cross_entropy,dev_si_sdr\n";
  for (const auto& e : report.epochs) {
    const auto& l = e.train_loss;
    csv += std::to_string(e.epoch) + "," + fmt(e.learning_rate) + "," + std::to_string(e.steps) + "," + fmt(l.total) +
           "," + fmt(l.sdr_speech) + "," + fmt(l.sdr_noise) + "," + fmt(l.cross_entropy) + "," +
           (e.dev_si_sdr ? fmt(*e.dev_si_sdr) : "") + "\n";
  }
  write_text(dir / "epochs.csv", csv);
  if (!report.test.empty()) objectives::write_metrics_csv(dir / "test_metrics.csv", report.test);
}

namespace {

LossBreakdown run_batch(const model::Model& m, ParamStore* grads, const std::vector<const data::UtterancePair*>& batch,
                        const TrainData& data, const objectives::LossConfig& loss) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  LossBreakdown mean;
  mean.alpha = m.config.use_spk ? loss.alpha : 0.0;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto* pair : batch) {
    Tape tape;
    nn::ParamBinder bind(tape, m.params, grads);
    model::ModelOutput out;
    Var y = model::enhance_graph(bind, m, pair->mixture, &out);
    const std::size_t label = m.config.use_spk ? data.label_of(pair->speaker) : 0;
    auto l = objectives::multitask_loss(tape.constant(signal(pair->clean)), y, tape.constant(signal(pair->mixture)),
                                        m.config.use_spk ? &out.posterior : nullptr, label, loss);
    if (!std::isfinite(l.total.value()[0])) throw NumericalError("non-finite loss on utterance " + pair->id);
    if (grads != nullptr) tape.backward(l.total);
    accumulate(mean, l.parts, w);
  }
  return mean;
}

}  // namespace

LossBreakdown batch_loss(const model::Model& m, const std::vector<const data::UtterancePair*>& batch,
                         const TrainData& data, const objectives::LossConfig& loss) {
  return run_batch(m, nullptr, batch, data, loss);
}

LossBreakdown train_step(model::Model& m, AdamState& optimizer, const std::vector<const data::UtterancePair*>& batch,
                         const TrainData& data, const objectives::LossConfig& loss) {
  ParamStore grads = m.params.zeros_like();
  const LossBreakdown mean = run_batch(m, &grads, batch, data, loss);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (double& g : grads.value(i).storage()) g *= w;
  adam_step(m.params, grads, optimizer);
  return mean;
}

std::vector<UtteranceMetrics> evaluate(const model::Model& m, const std::vector<data::UtterancePair>& pairs,
                                       const objectives::LossConfig& loss) {
  std::vector<UtteranceMetrics> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::vector<double> y = model::enhance(m, p.mixture);
    const LossBreakdown b = objectives::evaluate_sdr_loss(p.clean, y, p.mixture, loss);
    rows.push_back({p.id, objectives::si_sdr(p.clean, y), objectives::sdr(p.clean, y, loss.epsilon), b.total, b.total,
                    0.0});
  }
  return rows;
}

std::vector<UtteranceMetrics> evaluate_noisy(const std::vector<data::UtterancePair>& pairs,
                                             const objectives::LossConfig& loss) {
  std::vector<UtteranceMetrics> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    const LossBreakdown b = objectives::evaluate_sdr_loss(p.clean, p.mixture, p.mixture, loss);
    rows.push_back({p.id, objectives::si_sdr(p.clean, p.mixture), objectives::sdr(p.clean, p.mixture, loss.epsilon),
                    b.total, b.total, 0.0});
  }
  return rows;
}

TrainResult train(const TrainData& data, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("train: the training set is empty");
  const model::ModelConfig mc = resolved_model_config(config, data);

  model::Model m = model::init_model(mc, config.stft, data::mix_seed(config.seed, kInitStream));
  m.norm = corpus_norm(data.train, config.stft);
  AdamState opt(m.params, config.learning_rate);

  nlohmann::json echo = config;
  echo["run"] = {{"model", mc},
                 {"label_speakers", data.label_speakers},
                 {"use_spk", data.use_spk},
                 {"train_utterances", data.train.size()},
                 {"dev_utterances", data.dev.size()},
                 {"test_utterances", data.test.size()},
                 {"init_seed", data::mix_seed(config.seed, kInitStream)}};

  Progress progress;
  progress.best = m.params;
  if (!options.resume_from.empty()) load_checkpoint(options.resume_from, m, opt, progress, echo);

  std::set<std::size_t> held_out;
  if (config.protocol != data::Protocol::kClose)
    for (const auto& p : data.test) held_out.insert(p.speaker);

  std::vector<double> timings;
  for (std::size_t epoch = progress.epoch + 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr_at(epoch, config);
    rec.train_loss.alpha = mc.use_spk ? config.loss.alpha : 0.0;
    opt.learning_rate = rec.learning_rate;

    const auto items = data::noise_swap_augment(data.train, config.augment_probability,
                                                data::mix_seed(data::mix_seed(config.seed, kAugmentStream), epoch));
    std::vector<std::size_t> frames(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) frames[i] = config.stft.num_frames(items[i].mixture.size());
    const auto batches = data::make_batches(frames, config.batch_size,
                                            data::mix_seed(data::mix_seed(config.seed, kBatchStream), epoch));

    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const data::UtterancePair*> batch;
      BatchEvent event{epoch, b, {}, {}};
      for (std::size_t i : batches[b]) {
        batch.push_back(&items[i]);
        event.ids.push_back(items[i].id);
        event.speakers.push_back(items[i].speaker);
        if (held_out.count(items[i].speaker) != 0)
          throw DataError("held-out speaker " + std::to_string(items[i].speaker) + " reached training batch " +
                          std::to_string(b) + " of epoch " + std::to_string(epoch));
      }
      if (options.on_batch) options.on_batch(event);
      LossBreakdown mean;
      try {
        mean = train_step(m, opt, batch, data, config.loss);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
      }
      accumulate(rec.train_loss, mean, static_cast<double>(batch.size()) / static_cast<double>(items.size()));
      ++rec.steps;
    }

    if (!data.dev.empty()) rec.dev_si_sdr = mean_si_sdr(evaluate(m, data.dev, config.loss));
    if (!rec.dev_si_sdr || !progress.best_dev || *rec.dev_si_sdr > *progress.best_dev) {
      progress.best = m.params;
      progress.best_epoch = epoch;
      progress.best_dev = rec.dev_si_sdr;
    }
    progress.records.push_back(rec);
    progress.epoch = epoch;
    timings.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (options.on_epoch) options.on_epoch(rec);

    const bool stop = options.stop_after_epoch == epoch;
    const bool periodic = config.checkpoint_every != 0 && epoch % config.checkpoint_every == 0;
    if (!options.out_dir.empty() && (periodic || stop || epoch == config.epochs))
      save_checkpoint(options.out_dir / "checkpoint", m, opt, progress, echo);
    if (stop) break;
  }

  TrainResult result;
  result.last = m;
  result.model = m;
  result.model.params = progress.best;
  result.optimizer = opt;
  result.report.config = echo;
  result.report.epochs = progress.records;
  result.report.best_epoch = progress.best_epoch;
  result.report.best_dev_si_sdr = progress.best_dev;
  if (progress.epoch == config.epochs && !data.test.empty())
    result.report.test = evaluate(result.model, data.test, config.loss);

  if (!options.out_dir.empty()) {
    write_report(options.out_dir, result.report);
    model::save_model(options.out_dir / "model", result.model);
    std::string csv = "epoch,seconds\n";
    const std::size_t first = progress.epoch + 1 - timings.size();
    for (std::size_t i = 0; i < timings.size(); ++i) csv += std::to_string(first + i) + "," + fmt(timings[i]) + "\n";
    write_text(options.out_dir / "timings.csv", csv);
  }
  return result;
}

void write_comparison_csv(const fs::path& path, const std::vector<ComparisonRow>& rows) {
  std::string csv = "Method,SI-SDR,Loss\n";
  for (const auto& r : rows) csv += r.method + "," + fmt(r.si_sdr) + "," + fmt(r.loss) + "\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, csv);
}

VerificationResult run_verification_experiment(const data::Manifest& manifest, const TrainConfig& config,
                                               const fs::path& out_dir) {
  config.validate();
  if (manifest.speakers().size() < 3)
    throw std::invalid_argument("verification needs a corpus with at least 3 speakers");
  VerificationResult result;
  bool noisy_done = false;
  for (auto protocol : {data::Protocol::kClose, data::Protocol::kOpen, data::Protocol::kOpenSpk}) {
    TrainConfig c = config;
    c.protocol = protocol;
    const TrainData d = load_protocol_data(manifest, c);
    if (!noisy_done) {
      const auto noisy = objectives::aggregate(evaluate_noisy(d.test, c.loss));
      result.rows.push_back({"Noisy", noisy.si_sdr, noisy.loss});
      noisy_done = true;
    }
    TrainOptions opts;
    if (!out_dir.empty()) opts.out_dir = out_dir / data::protocol_name(protocol);
    TrainResult r = train(d, c, opts);
    const auto mean = objectives::aggregate(r.report.test);
    result.rows.push_back({data::protocol_name(protocol), mean.si_sdr, mean.loss});
    result.reports.push_back(std::move(r.report));
  }
  if (!out_dir.empty()) write_comparison_csv(out_dir / "comparison.csv", result.rows);
  return result;
}

}  // namespace sase::train
