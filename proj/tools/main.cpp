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

// sase: corpus synthesis, training, enhancement and evaluation.
//
// Exit status: 0 success, 1 usage or invalid setting, 2 data or I/O error,
// 3 numerical failure (non-finite loss or gradient).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "sase/dsp/wav.hpp"
#include "sase/model/io.hpp"
#include "sase/train/config.hpp"
#include "sase/train/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace sase;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

struct Args {
  std::string config;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string manifest;
  std::string checkpoint;
  std::string resume;
  std::string split = "test";
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool diagnostics = false;
  bool noisy = false;
};

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

/// Prints the resolved invocation and stores it next to the outputs.
void echo(const std::string& command, const nlohmann::json& body, const std::string& out_dir) {
  nlohmann::json j = {{"command", command}};
  j.update(body);
  std::cout << j.dump(2) << std::endl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "resolved_config.json", j.dump(2) + "\n");
  }
}

train::RunConfig resolve(const Args& a, const char* seed_key) {
  std::vector<std::string> overrides = a.overrides;
  if (a.seed_set) overrides.push_back(std::string(seed_key) + "=" + std::to_string(a.seed));
  return train::load_run_config(a.config, overrides);
}

void require_out_dir(const Args& a) {
  if (a.out_dir.empty()) throw CLI::ValidationError("--out-dir", "is required for this subcommand");
}

int cmd_synth(const Args& a) {
  require_out_dir(a);
  const auto cfg = resolve(a, "data.seed");
  echo("synth-data", {{"out_dir", a.out_dir}, {"data", cfg.data}}, a.out_dir);
  const auto m = data::generate_corpus(cfg.data, a.out_dir);
  std::cout << "wrote " << m.entries.size() << " utterances to " << (fs::path(a.out_dir) / "manifest.jsonl").string()
            << "\n";
  return 0;
}

int cmd_train(const Args& a) {
  require_out_dir(a);
  const auto cfg = resolve(a, "train.seed");
  nlohmann::json body = train::to_json(cfg);
  body.erase("data");
  echo("train", {{"manifest", a.manifest}, {"out_dir", a.out_dir}, {"resume", a.resume}, {"config", body}},
       a.out_dir);
  const auto manifest = data::read_manifest(a.manifest);
  const auto d = train::load_protocol_data(manifest, cfg.train);
  train::TrainOptions o;
  o.out_dir = a.out_dir;
  o.resume_from = a.resume;
  o.on_epoch = [](const train::EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " lr " << fmt(r.learning_rate) << " loss " << fmt(r.train_loss.total);
    if (r.dev_si_sdr) std::cout << " dev SI-SDR " << fmt(*r.dev_si_sdr);
    std::cout << std::endl;
  };
  const auto r = train::train(d, cfg.train, o);
  if (!r.report.test.empty())
    std::cout << "test SI-SDR " << fmt(objectives::aggregate(r.report.test).si_sdr) << " (best epoch "
              << r.report.best_epoch << ")\n";
  return 0;
}

void write_posteriors(const fs::path& path, const Tensor& p) {
  // one row per frame, one column per speaker class
  std::string csv = "frame";
  for (std::size_t l = 0; l < p.dim(0); ++l) csv += ",class" + std::to_string(l);
  csv += "\n";
  for (std::size_t k = 0; k < p.dim(1); ++k) {
    csv += std::to_string(k);
    for (std::size_t l = 0; l < p.dim(0); ++l) csv += "," + fmt(p.at(l, k));
    csv += "\n";
  }
  write_text(path, csv);
}

void write_grid(const fs::path& path, const Tensor& g) {
  std::string csv;
  for (std::size_t i = 0; i < g.dim(0); ++i) {
    for (std::size_t j = 0; j < g.dim(1); ++j) csv += (j ? "," : "") + fmt(g.at(i, j));
    csv += "\n";
  }
  write_text(path, csv);
}

int cmd_enhance(const Args& a) {
  require_out_dir(a);
  if (a.inputs.empty()) throw CLI::ValidationError("inputs", "at least one WAV file is required");
  const auto m = model::load_model(a.checkpoint);
  echo("enhance",
       {{"checkpoint", a.checkpoint},
        {"inputs", a.inputs},
        {"out_dir", a.out_dir},
        {"diagnostics", a.diagnostics},
        {"model", m.config},
        {"stft", m.stft}},
       a.out_dir);
  for (const auto& in : a.inputs) {
    const auto wav = dsp::read_wav(in);
    model::Diagnostics diag;
    const auto y = model::enhance(m, wav.samples, a.diagnostics ? &diag : nullptr);
    const std::string stem = fs::path(in).stem().string();
    const fs::path out = fs::path(a.out_dir) / (stem + "_enhanced.wav");
    dsp::write_wav(out, y, wav.sample_rate, wav.format);
    std::cout << out.string() << "\n";
    if (!a.diagnostics) continue;
    if (!diag.frame_posteriors.empty())
      write_posteriors(fs::path(a.out_dir) / (stem + "_posteriors.csv"), diag.frame_posteriors);
    for (std::size_t i = 0; i < diag.attention.size(); ++i)
      for (std::size_t h = 0; h < diag.attention[i].size(); ++h)
        write_grid(fs::path(a.out_dir) /
                       (stem + "_attention_m" + std::to_string(i) + "_h" + std::to_string(h) + ".csv"),
                   diag.attention[i][h]);
  }
  return 0;
}

int cmd_evaluate(const Args& a) {
  require_out_dir(a);
  if (a.checkpoint.empty() && !a.noisy)
    throw CLI::ValidationError("--checkpoint", "is required unless --noisy is given");
  const auto split = data::parse_split(a.split);
  const auto cfg = resolve(a, "train.seed");
  nlohmann::json body = {{"manifest", a.manifest}, {"split", a.split}, {"out_dir", a.out_dir},
                         {"noisy", a.noisy},       {"loss", cfg.train.loss}};
  model::Model m;
  if (!a.noisy) {
    m = model::load_model(a.checkpoint);
    body["checkpoint"] = a.checkpoint;
    body["model"] = m.config;
  }
  echo("evaluate", body, a.out_dir);
  const auto manifest = data::read_manifest(a.manifest);
  std::vector<data::UtterancePair> pairs;
  for (const auto& e : manifest.entries)
    if (e.split == split) pairs.push_back(data::load_pair(manifest, e));
  if (pairs.empty()) throw DataError("split '" + a.split + "' of " + a.manifest + " is empty");
  const auto rows = a.noisy ? train::evaluate_noisy(pairs, cfg.train.loss) : train::evaluate(m, pairs, cfg.train.loss);
  const fs::path out = fs::path(a.out_dir) / "metrics.csv";
  objectives::write_metrics_csv(out, rows);
  const auto mean = objectives::aggregate(rows);
  std::cout << "mean SI-SDR " << fmt(mean.si_sdr) << " SDR " << fmt(mean.sdr) << " loss " << fmt(mean.loss) << "\n"
            << out.string() << "\n";
  return 0;
}

int cmd_verify(const Args& a) {
  require_out_dir(a);
  const auto cfg = resolve(a, "train.seed");
  echo("verify", {{"manifest", a.manifest}, {"out_dir", a.out_dir}, {"config", train::to_json(cfg)}}, a.out_dir);
  data::Manifest manifest;
  if (a.manifest.empty())
    manifest = data::generate_corpus(cfg.data, fs::path(a.out_dir) / "corpus");
  else
    manifest = data::read_manifest(a.manifest);
  const auto v = train::run_verification_experiment(manifest, cfg.train, a.out_dir);
  for (const auto& r : v.rows) std::cout << r.method << " SI-SDR " << fmt(r.si_sdr) << " loss " << fmt(r.loss) << "\n";
  std::cout << (fs::path(a.out_dir) / "comparison.csv").string() << "\n";
  return 0;
}

int cmd_inspect(const Args& a) {
  if (a.checkpoint.empty() == a.manifest.empty())
    throw CLI::ValidationError("inspect", "give exactly one of --checkpoint or --manifest");
  nlohmann::json j;
  if (!a.checkpoint.empty()) {
    const auto m = model::load_model(a.checkpoint);
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < m.params.size(); ++i)
      tensors.push_back({{"name", m.params.names()[i]}, {"shape", m.params.value(i).shape()}});
    j = {{"model", m.config},
         {"stft", m.stft},
         {"parameters", m.params.total_elements()},
         {"tensors", tensors}};
  } else {
    const auto manifest = data::read_manifest(a.manifest);
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    std::size_t samples = 0;
    for (const auto& e : manifest.entries) {
      ++counts[std::to_string(e.speaker)][data::split_name(e.split)];
      samples += e.samples;
    }
    j = {{"utterances", manifest.entries.size()}, {"samples", samples}, {"speakers", counts}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-adapting speech enhancement: corpus synthesis, training, enhancement, evaluation"};
  app.require_subcommand(1);
  Args a;

  auto config_flags = [&](CLI::App* c) {
    c->add_option("--config", a.config, "JSON run configuration")->check(CLI::ExistingFile);
    c->add_option("--override", a.overrides, "section.key=value, repeatable");
    c->add_option("--seed", a.seed, "Replaces the seed of the run")->each([&](const std::string&) {
      a.seed_set = true;
    });
  };

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic corpus and its manifest");
  config_flags(synth);
  synth->add_option("--out-dir", a.out_dir, "Corpus directory");

  auto* tr = app.add_subcommand("train", "Train one protocol on a corpus");
  config_flags(tr);
  tr->add_option("--manifest", a.manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  tr->add_option("--out-dir", a.out_dir, "Run directory");
  tr->add_option("--resume", a.resume, "checkpoint/ directory of an interrupted run")->check(CLI::ExistingDirectory);

  auto* en = app.add_subcommand("enhance", "Enhance WAV files with a trained model");
  en->add_option("inputs", a.inputs, "Input WAV files")->check(CLI::ExistingFile);
  en->add_option("--checkpoint", a.checkpoint, "Model stem, e.g. run/model")->required();
  en->add_option("--out-dir", a.out_dir, "Output directory");
  en->add_flag("--diagnostics", a.diagnostics, "Also write posterior and attention CSV grids");

  auto* ev = app.add_subcommand("evaluate", "Per-utterance metrics on a manifest split");
  config_flags(ev);
  ev->add_option("--manifest", a.manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", a.checkpoint, "Model stem");
  ev->add_option("--split", a.split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  ev->add_option("--out-dir", a.out_dir, "Output directory");
  ev->add_flag("--noisy", a.noisy, "Score the untouched mixtures instead of a model");

  auto* ve = app.add_subcommand("verify", "Close / Open / Open+SPK comparison table");
  config_flags(ve);
  ve->add_option("--manifest", a.manifest, "Existing corpus; synthesised from the data section when absent")
      ->check(CLI::ExistingFile);
  ve->add_option("--out-dir", a.out_dir, "Output directory");

  auto* in = app.add_subcommand("inspect", "Describe a model or a manifest");
  in->add_option("--checkpoint", a.checkpoint, "Model stem");
  in->add_option("--manifest", a.manifest, "manifest.jsonl")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) return cmd_synth(a);
    if (*tr) return cmd_train(a);
    if (*en) return cmd_enhance(a);
    if (*ev) return cmd_evaluate(a);
    if (*ve) return cmd_verify(a);
    if (*in) return cmd_inspect(a);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
