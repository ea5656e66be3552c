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

#ifndef SASE_DSP_WAV_HPP_
#define SASE_DSP_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sase::dsp {

enum class SampleFormat { kPcm16, kFloat32 };

struct WavData {
  std::uint32_t sample_rate = 16000;
  SampleFormat format = SampleFormat::kFloat32;
  std::vector<double> samples;  // mono, PCM16 scaled to [-1, 1)
};

/// Reads a mono RIFF/WAVE file in 16-bit PCM or 32-bit IEEE float
/// (including WAVE_FORMAT_EXTENSIBLE wrappers). Throws DataError naming the
/// path on anything else.
WavData read_wav(const std::filesystem::path& path);

/// PCM16 output is rounded to the nearest 1/32768 step and saturated.
void write_wav(const std::filesystem::path& path, std::span<const double> samples, std::uint32_t sample_rate,
               SampleFormat format = SampleFormat::kFloat32);

}  // namespace sase::dsp

#endif  // SASE_DSP_WAV_HPP_
