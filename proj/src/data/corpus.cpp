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

#include "sase/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sase/autodiff/tensor.hpp"
#include "sase/dsp/wav.hpp"

namespace sase::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSpeechRms = 0.1;
constexpr double kLowestPitch = 95.0;
constexpr double kGateFloor = 0.05;

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

void set_rms(std::vector<double>& v, double rms) {
  const double e = energy(v);
  if (e == 0.0) return;
  const double g = rms / std::sqrt(e / static_cast<double>(v.size()));
  for (double& x : v) x *= g;
}

std::vector<double> fit_length(const std::vector<double>& v, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i % v.size()];
  return out;
}

UtterancePair combine(const UtterancePair& speech, const std::vector<double>& noise) {
  UtterancePair p = speech;
  p.noise = fit_length(noise, speech.clean.size());
  p.mixture.resize(p.clean.size());
  for (std::size_t i = 0; i < p.clean.size(); ++i) p.mixture[i] = p.clean[i] + p.noise[i];
  const double en = energy(p.noise);
  p.snr_db = en > 0.0 ? 10.0 * std::log10(energy(p.clean) / en) : 0.0;
  return p;
}

std::string utterance_id(std::size_t speaker, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "spk%zu_%04zu", speaker, index);
  return buf;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kBandpass: return "bandpass";
    case NoiseKind::kModulated: return "modulated";
  }
  return "white";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "bandpass") return NoiseKind::kBandpass;
  if (name == "modulated") return NoiseKind::kModulated;
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void CorpusConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("CorpusConfig: " + why); };
  if (speakers < 2) fail("at least 2 speakers are required");
  if (per_speaker < 1) fail("at least 1 utterance per speaker is required");
  if (snr_db.empty()) fail("the SNR set is empty");
  if (!(min_seconds > 0.0) || max_seconds < min_seconds) fail("invalid duration range");
  if (sample_rate < 1000) fail("sample rate too low");
  if (dev_fraction < 0 || test_fraction < 0 || dev_fraction + test_fraction >= 1.0)
    fail("dev and test fractions must leave room for training data");
  if (!(f0_margin >= 0.0)) fail("pitch margin must be non-negative");
  const double top = kLowestPitch * std::pow(1.0 + 1.5 * f0_margin, static_cast<double>(speakers - 1)) * 1.3;
  if (top >= 0.45 * sample_rate) fail("too many speakers for the pitch ladder at this margin and sample rate");
}

std::vector<SpeakerProfile> make_speaker_profiles(std::size_t count, double f0_margin, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x5BEA));
  // pitch centres on a geometric ladder, jittered inside the margin
  const double step = 1.0 + 1.5 * f0_margin;
  std::vector<double> centres(count);
  for (std::size_t i = 0; i < count; ++i) centres[i] = kLowestPitch * std::pow(step, static_cast<double>(i));
  std::shuffle(centres.begin(), centres.end(), rng);
  std::vector<SpeakerProfile> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    SpeakerProfile& p = out[i];
    p.f0 = centres[i] * (1.0 + uniform(rng, -0.1, 0.1) * f0_margin);
    p.f0_spread = uniform(rng, 0.05, 0.15);
    const double scale = uniform(rng, 0.85, 1.2);
    p.formants = {uniform(rng, 350, 850) * scale, uniform(rng, 1000, 2000) * scale, uniform(rng, 2200, 3200) * scale};
    p.bandwidths = {uniform(rng, 60, 120), uniform(rng, 90, 160), uniform(rng, 120, 220)};
    p.syllable_rate = uniform(rng, 3.0, 6.0);
  }
  return out;
}

std::vector<double> synthesize_speech(const SpeakerProfile& p, std::size_t samples, std::uint32_t sample_rate,
                                      std::mt19937_64& rng) {
  const double sr = static_cast<double>(sample_rate);
  const double vib_rate = uniform(rng, 0.5, 1.5), vib_phase = uniform(rng, 0, kTwoPi);
  const double syl_phase = uniform(rng, 0, kTwoPi);
  const double drift = uniform(rng, -0.05, 0.05);
  const std::size_t harmonics = static_cast<std::size_t>(0.45 * sr / (p.f0 * (1 + p.f0_spread)));
  std::vector<double> phase(harmonics, 0.0), amp(harmonics, 0.0);
  for (auto& ph : phase) ph = uniform(rng, 0, kTwoPi);
  std::vector<double> out(samples, 0.0);
  double base = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    const double t = static_cast<double>(n) / sr;
    const double f0 = p.f0 * (1.0 + p.f0_spread * std::sin(kTwoPi * vib_rate * t + vib_phase) + drift * t);
    if (n % 16 == 0) {
      for (std::size_t h = 0; h < harmonics; ++h) {
        const double f = f0 * static_cast<double>(h + 1);
        double a = 0.02 / static_cast<double>(h + 1);
        for (std::size_t k = 0; k < 3; ++k) {
          const double z = (f - p.formants[k]) / p.bandwidths[k];
          a += std::exp(-0.5 * z * z) / static_cast<double>(k + 1);
        }
        amp[h] = f < 0.47 * sr ? a : 0.0;
      }
    }
    base += kTwoPi * f0 / sr;
    double v = 0.0;
    for (std::size_t h = 0; h < harmonics; ++h) v += amp[h] * std::sin(static_cast<double>(h + 1) * base + phase[h]);
    const double syl = 0.5 - 0.5 * std::cos(kTwoPi * p.syllable_rate * t + syl_phase);
    out[n] = v * std::pow(syl, 1.5);
  }
  set_rms(out, kSpeechRms);
  return out;
}

std::vector<double> synthesize_noise(NoiseKind kind, std::size_t samples, std::uint32_t sample_rate,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(samples);
  for (double& v : out) v = g(rng);
  const double sr = static_cast<double>(sample_rate);
  if (kind == NoiseKind::kBandpass) {
    // RBJ band-pass biquad, constant peak gain
    const double fc = uniform(rng, 300.0, std::min(4000.0, 0.4 * sr));
    const double q = uniform(rng, 1.0, 3.0);
    const double w = kTwoPi * fc / sr, alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0, b2 = -alpha / a0, a1 = -2.0 * std::cos(w) / a0, a2 = (1.0 - alpha) / a0;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : out) {
      const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  } else if (kind == NoiseKind::kModulated) {
    const double rate = uniform(rng, 2.0, 8.0), duty = uniform(rng, 0.2, 0.5), offset = uniform(rng, 0.0, 1.0);
    const double ramp = 0.005 * sr;
    const double period = sr / rate;
    for (std::size_t n = 0; n < samples; ++n) {
      const double pos = std::fmod(static_cast<double>(n) + offset * period, period);
      const double on = duty * period;
      double e = kGateFloor;
      if (pos < on) e = std::max(kGateFloor, std::min({1.0, pos / ramp, (on - pos) / ramp}));
      out[n] *= e;
    }
  }
  return out;
}

void scale_to_snr(const std::vector<double>& clean, std::vector<double>& noise, double snr_db) {
  const double es = energy(clean), en = energy(noise);
  if (es == 0.0 || en == 0.0) throw DataError("scale_to_snr: clean or noise signal is silent");
  const double g = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  for (double& v : noise) v *= g;
}

UtterancePair synthesize_pair(const SpeakerProfile& profile, std::size_t speaker, NoiseKind kind, double snr_db,
                              std::size_t samples, std::uint32_t sample_rate, std::uint64_t seed) {
  std::mt19937_64 speech_rng(mix_seed(seed, 1)), noise_rng(mix_seed(seed, 2));
  UtterancePair p;
  p.speaker = speaker;
  p.snr_db = snr_db;
  p.sample_rate = sample_rate;
  p.clean = synthesize_speech(profile, samples, sample_rate, speech_rng);
  p.noise = synthesize_noise(kind, samples, sample_rate, noise_rng);
  scale_to_snr(p.clean, p.noise, snr_db);
  p.mixture.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) p.mixture[i] = p.clean[i] + p.noise[i];
  return p;
}

std::vector<std::size_t> Manifest::speakers() const {
  std::set<std::size_t> s;
  for (const auto& e : entries) s.insert(e.speaker);
  return {s.begin(), s.end()};
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json j = {{"id", e.id},
                                {"speaker", e.speaker},
                                {"split", split_name(e.split)},
                                {"snr_db", e.snr_db},
                                {"noise_kind", e.noise_kind},
                                {"samples", e.samples},
                                {"sample_rate", e.sample_rate},
                                {"clean", e.clean},
                                {"noise", e.noise},
                                {"mixture", e.mixture}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("cannot write manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.speaker = j.at("speaker").get<std::size_t>();
      e.split = parse_split(j.at("split").get<std::string>());
      e.snr_db = j.value("snr_db", 0.0);
      e.noise_kind = j.value("noise_kind", std::string());
      e.samples = j.value("samples", std::size_t{0});
      e.sample_rate = j.value("sample_rate", std::uint32_t{16000});
      e.clean = j.at("clean").get<std::string>();
      e.noise = j.value("noise", std::string());
      e.mixture = j.at("mixture").get<std::string>();
      m.entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return m;
}

Manifest generate_corpus(const CorpusConfig& c, const std::filesystem::path& out_dir) {
  c.validate();
  const auto profiles = make_speaker_profiles(c.speakers, c.f0_margin, c.seed);
  const std::filesystem::path wav_dir = out_dir / "wav";
  std::error_code ec;
  std::filesystem::create_directories(wav_dir, ec);
  if (ec) throw DataError("cannot create " + wav_dir.string() + ": " + ec.message());

  const std::size_t n_test = static_cast<std::size_t>(std::lround(c.test_fraction * static_cast<double>(c.per_speaker)));
  const std::size_t n_dev = static_cast<std::size_t>(std::lround(c.dev_fraction * static_cast<double>(c.per_speaker)));
  const std::size_t n_train = c.per_speaker - std::min(c.per_speaker, n_test + n_dev);

  Manifest m;
  m.root = out_dir;
  const NoiseKind kinds[] = {NoiseKind::kWhite, NoiseKind::kBandpass, NoiseKind::kModulated};
  for (std::size_t s = 0; s < c.speakers; ++s) {
    for (std::size_t u = 0; u < c.per_speaker; ++u) {
      const std::uint64_t seed = mix_seed(c.seed, s * 1000003ULL + u);
      std::mt19937_64 rng(mix_seed(seed, 0));
      const double seconds = uniform(rng, c.min_seconds, c.max_seconds);
      const auto samples = static_cast<std::size_t>(std::lround(seconds * c.sample_rate));
      const NoiseKind kind = kinds[(s + u) % 3];
      const double snr = c.snr_db[u % c.snr_db.size()];
      const UtterancePair p = synthesize_pair(profiles[s], s, kind, snr, samples, c.sample_rate, seed);

      ManifestEntry e;
      e.id = utterance_id(s, u);
      e.speaker = s;
      e.split = u < n_train ? Split::kTrain : (u < n_train + n_dev ? Split::kDev : Split::kTest);
      e.snr_db = snr;
      e.noise_kind = noise_kind_name(kind);
      e.samples = samples;
      e.sample_rate = c.sample_rate;
      e.clean = "wav/" + e.id + "_clean.wav";
      e.noise = "wav/" + e.id + "_noise.wav";
      e.mixture = "wav/" + e.id + "_mix.wav";
      dsp::write_wav(out_dir / e.clean, p.clean, c.sample_rate);
      dsp::write_wav(out_dir / e.noise, p.noise, c.sample_rate);
      dsp::write_wav(out_dir / e.mixture, p.mixture, c.sample_rate);
      m.entries.push_back(std::move(e));
    }
  }
  write_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

UtterancePair load_pair(const Manifest& manifest, const ManifestEntry& e) {
  const auto clean = dsp::read_wav(manifest.root / e.clean);
  const auto mix = dsp::read_wav(manifest.root / e.mixture);
  if (clean.samples.size() != mix.samples.size())
    throw DataError(e.id + ": clean and mixture lengths differ");
  UtterancePair p;
  p.id = e.id;
  p.speaker = e.speaker;
  p.snr_db = e.snr_db;
  p.sample_rate = mix.sample_rate;
  p.clean = clean.samples;
  p.mixture = mix.samples;
  if (!e.noise.empty()) {
    p.noise = dsp::read_wav(manifest.root / e.noise).samples;
    if (p.noise.size() != p.clean.size()) throw DataError(e.id + ": noise length differs");
  } else {
    p.noise.resize(p.clean.size());
    for (std::size_t i = 0; i < p.clean.size(); ++i) p.noise[i] = p.mixture[i] - p.clean[i];
  }
  return p;
}

std::pair<UtterancePair, UtterancePair> noise_swap(const UtterancePair& a, const UtterancePair& b) {
  if (a.sample_rate != b.sample_rate) throw std::invalid_argument("noise_swap: sample rates differ");
  if (&a == &b) return {a, b};
  return {combine(a, b.noise), combine(b, a.noise)};
}

std::vector<UtterancePair> noise_swap_augment(const std::vector<UtterancePair>& items, double probability,
                                              std::uint64_t seed) {
  std::vector<UtterancePair> out = items;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(items.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < perm.size(); i += 2) {
    if (u(rng) >= probability) continue;
    auto [x, y] = noise_swap(items[perm[i]], items[perm[i + 1]]);
    out[perm[i]] = std::move(x);
    out[perm[i + 1]] = std::move(y);
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& frames, std::size_t batch_size,
                                                   std::uint64_t seed, double max_ratio) {
  if (frames.empty()) throw std::invalid_argument("make_batches: the split is empty");
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frames[a] < frames[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i : order) {
    if (batches.empty() || batches.back().size() == batch_size ||
        static_cast<double>(frames[i]) > max_ratio * static_cast<double>(frames[batches.back().front()]))
      batches.emplace_back();
    batches.back().push_back(i);
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kClose: return "Close";
    case Protocol::kOpen: return "Open";
    case Protocol::kOpenSpk: return "Open+SPK";
  }
  return "Open";
}

Protocol parse_protocol(const std::string& name) {
  if (name == "Close" || name == "close") return Protocol::kClose;
  if (name == "Open" || name == "open") return Protocol::kOpen;
  if (name == "Open+SPK" || name == "OpenSpk" || name == "open+spk" || name == "openspk") return Protocol::kOpenSpk;
  throw std::invalid_argument("unknown protocol '" + name + "' (expected Close, Open or Open+SPK)");
}

std::size_t ProtocolSplit::label_of(std::size_t speaker) const {
  const auto it = std::find(train_speakers.begin(), train_speakers.end(), speaker);
  if (it == train_speakers.end())
    throw std::out_of_range("speaker " + std::to_string(speaker) + " is not a training speaker");
  return static_cast<std::size_t>(it - train_speakers.begin());
}

ProtocolSplit protocol_split(const Manifest& manifest, Protocol protocol, std::size_t target) {
  const auto speakers = manifest.speakers();
  if (std::find(speakers.begin(), speakers.end(), target) == speakers.end())
    throw std::invalid_argument("protocol_split: target speaker " + std::to_string(target) + " is not in the corpus");
  ProtocolSplit out;
  out.protocol = protocol;
  out.target = target;
  out.use_spk = protocol == Protocol::kOpenSpk;
  for (const auto& e : manifest.entries) {
    const bool is_target = e.speaker == target;
    if (is_target && e.split == Split::kTest) {
      out.test.push_back(e);
      continue;
    }
    const bool train_side = protocol == Protocol::kClose ? is_target : !is_target;
    if (!train_side || e.split == Split::kTest) continue;
    (e.split == Split::kTrain ? out.train : out.dev).push_back(e);
  }
  if (protocol == Protocol::kClose)
    out.train_speakers = {target};
  else
    for (std::size_t s : speakers)
      if (s != target) out.train_speakers.push_back(s);
  return out;
}

}  // namespace sase::data
