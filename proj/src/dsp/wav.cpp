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

#include "sase/dsp/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "sase/autodiff/tensor.hpp"

namespace sase::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le(const std::vector<unsigned char>& b, std::size_t pos, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
  return v;
}

void put(std::vector<unsigned char>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  const std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> DataError { return DataError(path.string() + ": " + why); };
  auto tag = [&](std::size_t pos, const char* t) { return std::equal(t, t + 4, b.begin() + pos); };
  if (b.size() < 12 || !tag(0, "RIFF") || !tag(8, "WAVE")) throw fail("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = le(b, pos + 4, 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw fail("truncated chunk");
    if (tag(pos, "fmt ")) {
      if (size < 16) throw fail("short fmt chunk");
      format = static_cast<std::uint16_t>(le(b, body, 2));
      channels = static_cast<std::uint16_t>(le(b, body + 2, 2));
      rate = le(b, body + 4, 4);
      bits = static_cast<std::uint16_t>(le(b, body + 14, 2));
      if (format == kFormatExtensible) {
        if (size < 26) throw fail("short extensible fmt chunk");
        format = static_cast<std::uint16_t>(le(b, body + 24, 2));
      }
      have_fmt = true;
    } else if (tag(pos, "data")) {
      if (!have_fmt) throw fail("data chunk precedes fmt chunk");
      if (channels != 1) throw fail("only mono audio is supported, file has " + std::to_string(channels) + " channels");
      WavData wav;
      wav.sample_rate = rate;
      if (format == kFormatPcm && bits == 16) {
        wav.format = SampleFormat::kPcm16;
        wav.samples.resize(size / 2);
        for (std::size_t i = 0; i < wav.samples.size(); ++i) {
          const auto raw = static_cast<std::int16_t>(le(b, body + 2 * i, 2));
          wav.samples[i] = static_cast<double>(raw) / 32768.0;
        }
      } else if (format == kFormatFloat && bits == 32) {
        wav.format = SampleFormat::kFloat32;
        wav.samples.resize(size / 4);
        for (std::size_t i = 0; i < wav.samples.size(); ++i)
          wav.samples[i] = static_cast<double>(std::bit_cast<float>(le(b, body + 4 * i, 4)));
      } else {
        throw fail("unsupported sample format " + std::to_string(format) + "/" + std::to_string(bits) + " bit");
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  throw fail("no data chunk");
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, std::uint32_t sample_rate,
               SampleFormat format) {
  const bool pcm = format == SampleFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * (bits / 8));
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put(out, 36 + data_bytes, 4);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put(out, 16, 4);
  put(out, pcm ? kFormatPcm : kFormatFloat, 2);
  put(out, 1, 2);
  put(out, sample_rate, 4);
  put(out, sample_rate * (bits / 8), 4);
  put(out, bits / 8, 2);
  put(out, bits, 2);
  put_tag(out, "data");
  put(out, data_bytes, 4);
  for (double s : samples) {
    if (pcm) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)), 2);
    } else {
      put(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)), 4);
    }
  }
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("cannot write WAV file " + path.string());
}

}  // namespace sase::dsp
