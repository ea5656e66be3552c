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

// Synthetic speech/noise corpus, manifests and batching.
//
// Manifest format: JSON lines, one utterance each,
//   {"id": "spk1_0007", "speaker": 1, "split": "train", "snr_db": 0.0,
//    "noise_kind": "modulated", "samples": 15872, "sample_rate": 16000,
//    "clean": "wav/spk1_0007_clean.wav", "noise": "wav/spk1_0007_noise.wav",
//    "mixture": "wav/spk1_0007_mix.wav"}
// with paths relative to the manifest's directory.

#ifndef SASE_DATA_CORPUS_HPP_
#define SASE_DATA_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sase::data {

/// SplitMix64 finaliser; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct UtterancePair {
  std::string id;
  std::vector<double> clean;
  std::vector<double> noise;
  std::vector<double> mixture;  // clean + noise
  std::size_t speaker = 0;
  double snr_db = 0.0;
  std::uint32_t sample_rate = 16000;
};

struct SpeakerProfile {
  double f0 = 150.0;               // Hz, centre of the pitch contour
  double f0_spread = 0.1;          // relative excursion of the contour
  std::array<double, 3> formants{500.0, 1500.0, 2500.0};
  std::array<double, 3> bandwidths{80.0, 120.0, 160.0};
  double syllable_rate = 4.0;      // Hz, amplitude envelope
};

enum class NoiseKind { kWhite, kBandpass, kModulated };
const char* noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

enum class Split { kTrain, kDev, kTest };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct CorpusConfig {
  std::size_t speakers = 4;
  std::size_t per_speaker = 300;
  std::vector<double> snr_db{0.0};
  double min_seconds = 0.8;
  double max_seconds = 1.2;
  std::uint32_t sample_rate = 16000;
  double dev_fraction = 0.1;
  double test_fraction = 0.2;
  /// Minimum relative gap between the pitch centres of any two speakers.
  double f0_margin = 0.12;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on impossible settings.
  void validate() const;
  bool operator==(const CorpusConfig&) const = default;
};

/// Profiles with pitch centres spaced at least `f0_margin` apart.
std::vector<SpeakerProfile> make_speaker_profiles(std::size_t count, double f0_margin, std::uint64_t seed);

std::vector<double> synthesize_speech(const SpeakerProfile& profile, std::size_t samples, std::uint32_t sample_rate,
                                      std::mt19937_64& rng);
std::vector<double> synthesize_noise(NoiseKind kind, std::size_t samples, std::uint32_t sample_rate,
                                     std::mt19937_64& rng);

/// Scales `noise` so that 10 log10(|clean|^2 / |noise|^2) = snr_db.
void scale_to_snr(const std::vector<double>& clean, std::vector<double>& noise, double snr_db);

/// One complete pair; fully determined by its arguments.
UtterancePair synthesize_pair(const SpeakerProfile& profile, std::size_t speaker, NoiseKind kind, double snr_db,
                              std::size_t samples, std::uint32_t sample_rate, std::uint64_t seed);

struct ManifestEntry {
  std::string id;
  std::size_t speaker = 0;
  Split split = Split::kTrain;
  double snr_db = 0.0;
  std::string noise_kind;
  std::size_t samples = 0;
  std::uint32_t sample_rate = 16000;
  std::string clean;
  std::string noise;
  std::string mixture;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::filesystem::path root;  // directory the relative paths resolve against
  std::vector<ManifestEntry> entries;

  std::vector<std::size_t> speakers() const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Throws DataError naming the line on malformed input.
Manifest read_manifest(const std::filesystem::path& path);

/// Writes <out_dir>/wav/*.wav (32-bit float) and <out_dir>/manifest.jsonl.
/// Throws DataError on I/O failure.
Manifest generate_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);

/// Reads the three WAV files of an entry.
UtterancePair load_pair(const Manifest& manifest, const ManifestEntry& entry);

/// (s_a, n_b) and (s_b, n_a); each noise is looped or trimmed to the length
/// of the speech it joins and the mixtures are recomputed.
std::pair<UtterancePair, UtterancePair> noise_swap(const UtterancePair& a, const UtterancePair& b);

/// Pairs items of a seeded permutation and swaps the noise of each couple
/// with probability `probability`.
std::vector<UtterancePair> noise_swap_augment(const std::vector<UtterancePair>& items, double probability,
                                              std::uint64_t seed);

/// Groups item indices into batches of at most `batch_size` whose frame
/// counts differ by a ratio of at most `max_ratio`; the grouping and batch
/// order depend only on `seed`. Throws std::invalid_argument when empty.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& frame_counts,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   double max_ratio = 1.25);

enum class Protocol { kClose, kOpen, kOpenSpk };
const char* protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

struct ProtocolSplit {
  Protocol protocol = Protocol::kOpen;
  std::size_t target = 0;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> dev;
  std::vector<ManifestEntry> test;
  std::vector<std::size_t> train_speakers;  // corpus ids; label i = train_speakers[i]
  bool use_spk = false;

  /// Contiguous class label of a corpus speaker id. Throws std::out_of_range.
  std::size_t label_of(std::size_t speaker) const;
};

/// Close: train/dev on the target's own train/dev utterances. Open and
/// OpenSpk: train/dev on every other speaker. Test is always the target's
/// test split. Throws std::invalid_argument for an unknown target.
ProtocolSplit protocol_split(const Manifest& manifest, Protocol protocol, std::size_t target);

}  // namespace sase::data

#endif  // SASE_DATA_CORPUS_HPP_
