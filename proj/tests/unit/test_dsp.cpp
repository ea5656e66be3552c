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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "sase/autodiff/ops.hpp"
#include "sase/dsp/stft.hpp"
#include "sase/dsp/wav.hpp"
#include "support/gradcheck.hpp"

using namespace sase;
using namespace sase::dsp;

namespace {

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

// Direct O(N^2) DFT of one windowed frame.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame, std::size_t bins) {
  const std::size_t n = frame.size();
  std::vector<std::complex<double>> out(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ph = -2.0 * std::numbers::pi * static_cast<double>(f * t) / static_cast<double>(n);
      acc += frame[t] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    out[f] = acc;
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("stft geometry and validation") {
  StftConfig c;
  CHECK(c.num_bins() == 257);
  CHECK(c.num_frames(16000) == 1 + 16000 / 128);
  CHECK_NOTHROW(c.validate());
  StftConfig bad = c;
  bad.hop = 300;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.dft_size = 256;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  std::vector<double> shortx(100, 0.0);
  try {
    stft(shortx, c);
    FAIL("expected error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("512") != std::string::npos);
  }
}

TEST_CASE("stft of zeros is zero") {
  std::vector<double> x(2000, 0.0);
  auto s = stft(x, {});
  for (double v : s.real.data()) CHECK(v == 0.0);
  for (double v : s.imag.data()) CHECK(v == 0.0);
}

TEST_CASE("stft frames match a direct DFT of the reflect-padded signal") {
  StftConfig c{64, 16, 64};
  auto x = random_signal(300, 5);
  auto s = stft(x, c);
  const auto win = analysis_window(c);
  for (std::size_t k : {0u, 3u, 10u, static_cast<unsigned>(s.frames() - 1)}) {
    std::vector<double> frame(64);
    for (std::size_t t = 0; t < 64; ++t) {
      // Position in the original signal with reflection at both ends.
      long p = static_cast<long>(k * 16 + t) - 32;
      if (p < 0) p = -p;
      if (p >= 300) p = 2 * 299 - p;
      frame[t] = x[static_cast<std::size_t>(p)] * win[t];
    }
    auto ref = naive_dft(frame, c.num_bins());
    for (std::size_t f = 0; f < c.num_bins(); ++f) {
      CHECK(s.real.at(f, k) == doctest::Approx(ref[f].real()).epsilon(1e-10).scale(1.0));
      CHECK(s.imag.at(f, k) == doctest::Approx(ref[f].imag()).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("bin-centred sinusoid concentrates in the window main lobe") {
  StftConfig c;
  const std::size_t bin = 40;
  std::vector<double> x(4096);
  for (std::size_t n = 0; n < x.size(); ++n)
    x[n] = std::cos(2.0 * std::numbers::pi * static_cast<double>(bin * n) / 512.0);
  auto s = stft(x, c);
  const std::size_t k = s.frames() / 2;
  double total = 0.0, lobe = 0.0, peak = 0.0;
  std::size_t argmax = 0;
  for (std::size_t f = 0; f < s.bins(); ++f) {
    const double e = s.real.at(f, k) * s.real.at(f, k) + s.imag.at(f, k) * s.imag.at(f, k);
    total += e;
    if (f + 2 >= bin && f <= bin + 2) lobe += e;
    if (e > peak) peak = e, argmax = f;
  }
  CHECK(argmax == bin);
  CHECK(lobe / total >= 0.95);
  // Closed form: the periodic Blackman window is three cosines, so the
  // spectrum is (N/2) * {0.42, 0.25, 0.04} at offsets 0, +-1, +-2.
  const double mag0 = std::hypot(s.real.at(bin, k), s.imag.at(bin, k));
  const double mag1 = std::hypot(s.real.at(bin + 1, k), s.imag.at(bin + 1, k));
  const double mag2 = std::hypot(s.real.at(bin + 2, k), s.imag.at(bin + 2, k));
  CHECK(mag0 == doctest::Approx(256.0 * 0.42).epsilon(1e-9));
  CHECK(mag1 == doctest::Approx(256.0 * 0.25).epsilon(1e-9));
  CHECK(mag2 == doctest::Approx(256.0 * 0.04).epsilon(1e-9));
}

TEST_CASE("impulse at a frame centre has the window's centre value as flat magnitude") {
  StftConfig c;
  std::vector<double> x(3000, 0.0);
  const std::size_t k = 10;
  x[k * c.hop] = 1.0;
  auto s = stft(x, c);
  const auto win = analysis_window(c);
  // DFT of w[t] * delta[t - N/2] has magnitude w[N/2] in every bin.
  for (std::size_t f = 0; f < s.bins(); ++f)
    CHECK(std::hypot(s.real.at(f, k), s.imag.at(f, k)) == doctest::Approx(win[c.window_length / 2]).epsilon(1e-12));
}

TEST_CASE("istft inverts stft") {
  StftConfig c;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto x = random_signal(16000 + 37 * seed, seed);
    auto y = istft(stft(x, c), c, x.size());
    REQUIRE(y.size() == x.size());
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
    CHECK(err < 1e-6 * max_abs(x));
  }
}

TEST_CASE("istft zero, linearity, length and configuration checks") {
  StftConfig c;
  auto x1 = random_signal(4000, 1), x2 = random_signal(4000, 2);
  auto s1 = stft(x1, c), s2 = stft(x2, c);

  Spectrogram zero{Tensor::zeros(s1.real.shape()), Tensor::zeros(s1.real.shape()), c};
  CHECK(max_abs(istft(zero, c, 4000)) == 0.0);

  const double a = 0.7, b = -1.3;
  Spectrogram mix{Tensor(s1.real.shape()), Tensor(s1.real.shape()), c};
  for (std::size_t i = 0; i < mix.real.size(); ++i) {
    mix.real[i] = a * s1.real[i] + b * s2.real[i];
    mix.imag[i] = a * s1.imag[i] + b * s2.imag[i];
  }
  auto ymix = istft(mix, c, 4000), y1 = istft(s1, c, 4000), y2 = istft(s2, c, 4000);
  for (std::size_t i = 0; i < 4000; ++i) CHECK(std::abs(ymix[i] - (a * y1[i] + b * y2[i])) < 1e-9);

  CHECK(istft(s1, c, 4100).size() == 4100);
  CHECK(istft(s1, c, 3000).size() == 3000);

  StftConfig other{1024, 256, 1024};
  CHECK_THROWS_AS(istft(s1, other, 4000), std::invalid_argument);
}

TEST_CASE("differentiable istft matches finite differences") {
  StftConfig c{16, 4, 16};
  std::mt19937_64 rng(9);
  const std::size_t frames = c.num_frames(40);
  std::vector<Tensor> inputs = {testing::random_tensor({9, frames}, rng), testing::random_tensor({9, frames}, rng)};
  Tensor weights = testing::random_tensor({40}, rng);
  auto fn = [&](Tape& t, const std::vector<Var>& v) {
    Var y = istft(v[0], v[1], c, 40);
    return ops::sum(ops::mul(y, t.constant(weights)));
  };
  auto report = testing::check_gradients(fn, inputs, 0, 1);
  CHECK(report.max_rel_error < 1e-6);

  // The tape version agrees with the plain one.
  Tape tape;
  Var y = istft(tape.constant(inputs[0]), tape.constant(inputs[1]), c, 40);
  auto plain = istft(Spectrogram{inputs[0], inputs[1], c}, c, 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(y.value()[i] == plain[i]);
}

TEST_CASE("log amplitude features") {
  StftConfig c{16, 4, 16};
  Spectrogram s{Tensor::full({9, 3}, 0.6), Tensor::full({9, 3}, 0.8), c};
  auto f1 = log_amplitude_features(s);
  for (double v : f1.data()) CHECK(std::abs(v) < 1e-7);

  s.real.fill(std::numbers::e);
  s.imag.fill(0.0);
  const Tensor fe = log_amplitude_features(s);
  for (double v : fe.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));

  s.real.fill(0.0);
  const Tensor fz = log_amplitude_features(s);
  for (double v : fz.data()) CHECK(v == doctest::Approx(-18.420680743952367).epsilon(1e-12));
}

TEST_CASE("per-frequency normalisation") {
  std::mt19937_64 rng(4);
  Tensor a = testing::random_tensor({5, 40}, rng, -3, 7), b = testing::random_tensor({5, 25}, rng, -1, 2);
  std::vector<Tensor> grids = {a, b};
  auto stats = compute_norm_stats(grids);

  SUBCASE("features equal to the means map to zero") {
    Tensor m({5, 3});
    for (std::size_t f = 0; f < 5; ++f)
      for (std::size_t k = 0; k < 3; ++k) m.at(f, k) = stats.mean[f];
    const Tensor n = normalize_per_frequency(m, stats);
    for (double v : n.data()) CHECK(v == 0.0);
  }
  SUBCASE("own statistics give zero mean and unit deviation") {
    std::vector<Tensor> one = {a};
    auto own = compute_norm_stats(one);
    auto n = normalize_per_frequency(a, own);
    for (std::size_t f = 0; f < 5; ++f) {
      double mu = 0.0, var = 0.0;
      for (std::size_t k = 0; k < 40; ++k) mu += n.at(f, k);
      mu /= 40;
      for (std::size_t k = 0; k < 40; ++k) var += (n.at(f, k) - mu) * (n.at(f, k) - mu);
      var /= 40;
      CHECK(std::abs(mu) < 1e-10);
      // The 1e-8 guard in the denominator shifts the deviation by ~1e-8 / var.
      CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-8 / own.variance[f] + 1e-10);
    }
  }
  SUBCASE("constant row stays finite") {
    Tensor c = Tensor::full({5, 10}, 2.0);
    std::vector<Tensor> one = {c};
    auto cs = compute_norm_stats(one);
    CHECK(normalize_per_frequency(c, cs).all_finite());
  }
  SUBCASE("normalisation is invertible") {
    auto back = denormalize_per_frequency(normalize_per_frequency(b, stats), stats);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  SUBCASE("stats shape mismatch") {
    CHECK_THROWS_AS(normalize_per_frequency(Tensor::zeros({4, 3}), stats), ShapeError);
  }
}

TEST_CASE("apply_mask") {
  StftConfig c{16, 4, 16};
  std::mt19937_64 rng(2);
  Spectrogram s{testing::random_tensor({9, 4}, rng), testing::random_tensor({9, 4}, rng), c};
  ComplexMask one{Tensor::full({9, 4}, 1.0), Tensor::zeros({9, 4})};
  auto same = apply_mask(s, one);
  CHECK(same.real == s.real);
  CHECK(same.imag == s.imag);

  ComplexMask zero{Tensor::zeros({9, 4}), Tensor::zeros({9, 4})};
  const Spectrogram zeroed = apply_mask(s, zero);
  for (double v : zeroed.real.data()) CHECK(v == 0.0);

  Spectrogram real_only{s.real, Tensor::zeros({9, 4}), c};
  ComplexMask i_mask{Tensor::zeros({9, 4}), Tensor::full({9, 4}, 1.0)};
  auto rot = apply_mask(real_only, i_mask);
  for (std::size_t i = 0; i < 36; ++i) {
    CHECK(rot.real[i] == 0.0);
    CHECK(rot.imag[i] == s.real[i]);
  }

  ComplexMask m{testing::random_tensor({9, 4}, rng), testing::random_tensor({9, 4}, rng)};
  ComplexMask conj{m.real, m.imag};
  for (auto& v : conj.imag.data()) v = -v;
  auto twice = apply_mask(apply_mask(s, m), conj);
  for (std::size_t i = 0; i < 36; ++i) {
    const double mag2 = m.real[i] * m.real[i] + m.imag[i] * m.imag[i];
    CHECK(twice.real[i] == doctest::Approx(mag2 * s.real[i]).epsilon(1e-12));
    CHECK(twice.imag[i] == doctest::Approx(mag2 * s.imag[i]).epsilon(1e-12));
  }

  // Tape version agrees.
  Tape tape;
  auto [yr, yi] = apply_mask(tape.constant(m.real), tape.constant(m.imag), s);
  auto plain = apply_mask(s, m);
  for (std::size_t i = 0; i < 36; ++i) {
    CHECK(yr.value()[i] == doctest::Approx(plain.real[i]).epsilon(1e-15));
    CHECK(yi.value()[i] == doctest::Approx(plain.imag[i]).epsilon(1e-15));
  }

  ComplexMask wrong{Tensor::zeros({9, 3}), Tensor::zeros({9, 3})};
  CHECK_THROWS_AS(apply_mask(s, wrong), ShapeError);
}

TEST_CASE("wav round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "sase_wav_test";
  std::filesystem::remove_all(dir);
  auto x = random_signal(1001, 8);
  for (auto& v : x) v *= 0.2;

  write_wav(dir / "f.wav", x, 22050);
  auto f = read_wav(dir / "f.wav");
  CHECK(f.sample_rate == 22050);
  CHECK(f.format == SampleFormat::kFloat32);
  REQUIRE(f.samples.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(f.samples[i] - x[i]) < 1e-6);

  write_wav(dir / "p.wav", x, 16000, SampleFormat::kPcm16);
  auto p = read_wav(dir / "p.wav");
  CHECK(p.format == SampleFormat::kPcm16);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(p.samples[i] - x[i]) <= 0.5 / 32768.0 + 1e-15);
  // Re-writing decoded PCM reproduces the same file.
  write_wav(dir / "p2.wav", p.samples, 16000, SampleFormat::kPcm16);
  CHECK(read_wav(dir / "p2.wav").samples == p.samples);

  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), DataError);
  std::ofstream(dir / "junk.wav") << "not a wave file at all";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);

  // Hand-built stereo header is rejected.
  {
    std::ofstream s(dir / "stereo.wav", std::ios::binary);
    const unsigned char hdr[] = {'R', 'I', 'F', 'F', 40, 0, 0, 0, 'W', 'A', 'V', 'E', 'f', 'm', 't', ' ', 16, 0, 0, 0,
                                 1,   0,   2,   0,   0x80, 0x3e, 0, 0, 0, 0xfa, 0, 0, 4, 0, 16, 0,
                                 'd', 'a', 't', 'a', 4, 0, 0, 0, 0, 0, 0, 0};
    s.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  }
  CHECK_THROWS_AS(read_wav(dir / "stereo.wav"), DataError);
  std::filesystem::remove_all(dir);
}
