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
#include <filesystem>
#include <random>

#include "sase/objectives/losses.hpp"
#include "sase/objectives/metrics.hpp"
#include "support/gradcheck.hpp"

using namespace sase;
namespace obj = sase::objectives;
using sase::testing::check_gradients;
using sase::testing::random_tensor;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Tensor vec(const std::vector<double>& v) { return Tensor({v.size()}, v); }

}  // namespace

TEST_CASE("sdr closed forms") {
  std::mt19937_64 rng(1);
  const auto s = randn(400, rng);
  std::vector<double> half(s.size()), neg(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    half[i] = s[i] / 2;
    neg[i] = -s[i];
  }
  CHECK(obj::sdr(s, half) == doctest::Approx(6.020599913279624).epsilon(1e-9));
  CHECK(obj::sdr(s, neg) == doctest::Approx(-6.020599913279624).epsilon(1e-9));
  CHECK(obj::sdr(s, s) == doctest::Approx(10 * std::log10(dot(s, s) / 1e-8)));
  CHECK_THROWS_AS(obj::sdr(std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)), DataError);
  CHECK_THROWS_AS(obj::sdr(s, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST_CASE("clip") {
  CHECK(obj::clip(0.0, 20.0) == 0.0);
  CHECK(obj::clip(10.0, 20.0) == doctest::Approx(9.242343145200195).epsilon(1e-14));
  CHECK(obj::clip(1e6, 20.0) == doctest::Approx(20.0));
  // odd, monotone, bounded, unit slope at the origin
  double prev = -1e300;
  for (double x = -200; x <= 200; x += 0.37) {
    const double c = obj::clip(x, 20.0);
    CHECK(c == doctest::Approx(-obj::clip(-x, 20.0)));
    CHECK(c > prev);
    CHECK(std::abs(c) < 20.0);
    prev = c;
  }
  const double h = 1e-6;
  CHECK((obj::clip(h, 20.0) - obj::clip(-h, 20.0)) / (2 * h) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("si_sdr closed forms") {
  std::mt19937_64 rng(2);
  const auto s = randn(1000, rng);
  auto e = randn(1000, rng);
  const double proj = dot(e, s) / dot(s, s);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= proj * s[i];
  const double scale = std::sqrt(dot(s, s) / 10.0 / dot(e, e));
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i] + scale * e[i];
  CHECK(std::abs(obj::si_sdr(s, y) - 10.0) < 0.01);

  for (double c : {0.01, 0.5, 3.0, 1e3}) {
    std::vector<double> yc(y);
    for (auto& v : yc) v *= c;
    CHECK(std::abs(obj::si_sdr(s, yc) - obj::si_sdr(s, y)) < 1e-9);
  }
  std::vector<double> cs(s);
  for (auto& v : cs) v *= -2.5;
  CHECK(obj::si_sdr(s, cs) == obj::kSiSdrCap);
  CHECK(obj::si_sdr(s, e) == doctest::Approx(-obj::kSiSdrCap));
  CHECK(obj::si_sdr(s, std::vector<double>(1000, 0.0)) == -obj::kSiSdrCap);
}

TEST_CASE("sdr loss") {
  std::mt19937_64 rng(3);
  const obj::LossConfig cfg;
  const auto s = randn(300, rng), n = randn(300, rng, 0.7);
  std::vector<double> x(300);
  for (std::size_t i = 0; i < 300; ++i) x[i] = s[i] + n[i];

  SUBCASE("perfect estimate saturates at -beta") {
    // one second at 16 kHz; the epsilon floor caps SDR by signal energy
    const auto s1 = randn(16000, rng, 0.3), n1 = randn(16000, rng, 0.3);
    std::vector<double> x1(16000);
    for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = s1[i] + n1[i];
    Tape t;
    Var l = obj::sdr_loss(t.constant(vec(s1)), t.constant(vec(s1)), t.constant(vec(x1)), cfg);
    CHECK(std::abs(l.value()[0] + cfg.beta) < 1e-3);
  }
  SUBCASE("passthrough is finite") {
    Tape t;
    obj::LossBreakdown parts;
    Var l = obj::sdr_loss(t.constant(vec(s)), t.constant(vec(x)), t.constant(vec(x)), cfg, &parts);
    CHECK(std::isfinite(l.value()[0]));
    CHECK(parts.sdr_speech == doctest::Approx(obj::clip(obj::sdr(s, x), cfg.beta)));
    CHECK(parts.sdr_noise == doctest::Approx(obj::clip(10 * std::log10(dot(n, n) / (dot(n, n) + 1e-8)), cfg.beta)));
  }
  SUBCASE("plain and taped agree") {
    const auto y = randn(300, rng);
    Tape t;
    obj::LossBreakdown parts;
    obj::sdr_loss(t.constant(vec(s)), t.constant(vec(y)), t.constant(vec(x)), cfg, &parts);
    const auto plain = obj::evaluate_sdr_loss(s, y, x, cfg);
    CHECK(plain.total == doctest::Approx(parts.total).epsilon(1e-12));
    CHECK(plain.sdr_noise == doctest::Approx(parts.sdr_noise).epsilon(1e-12));
  }
  SUBCASE("degenerate references are named") {
    Tape t;
    Var zero = t.constant(Tensor::zeros({300}));
    try {
      obj::sdr_loss(zero, t.constant(vec(s)), t.constant(vec(x)), cfg);
      FAIL("expected throw");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("clean") != std::string::npos);
    }
    try {
      obj::sdr_loss(t.constant(vec(s)), t.constant(vec(x)), t.constant(vec(s)), cfg);
      FAIL("expected throw");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("noise") != std::string::npos);
    }
  }
  SUBCASE("bounded on random triples") {
    for (int trial = 0; trial < 1000; ++trial) {
      std::uniform_real_distribution<double> u(0.01, 10.0);
      const auto a = randn(64, rng, u(rng)), b = randn(64, rng, u(rng)), c = randn(64, rng, u(rng));
      const auto l = obj::evaluate_sdr_loss(a, b, c, cfg);
      CHECK(std::abs(l.total) < cfg.beta);
    }
  }
  SUBCASE("gradient matches finite differences") {
    const Tensor st = vec(s), xt = vec(x);
    auto fn = [&](Tape& t, const std::vector<Var>& in) {
      return obj::sdr_loss(t.constant(st), in[0], t.constant(xt), cfg);
    };
    CHECK(check_gradients(fn, {random_tensor({300}, rng)}, 60, 5).max_rel_error < 1e-4);
  }
  SUBCASE("config validation") {
    CHECK_THROWS_AS((obj::LossConfig{1.0, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((obj::LossConfig{-1.0, 20.0}.validate()), std::invalid_argument);
  }
}

TEST_CASE("cross entropy") {
  Tape t;
  Var uniform = t.constant(Tensor::full({4}, 0.25));
  CHECK(obj::cross_entropy(uniform, 2).value()[0] == doctest::Approx(1.3862943611198906).epsilon(1e-14));
  Var hot = t.constant(Tensor({3}, {0, 1, 0}));
  CHECK(obj::cross_entropy(hot, 1).value()[0] == 0.0);
  CHECK(obj::cross_entropy(hot, 0).value()[0] == doctest::Approx(-std::log(1e-8)));
  CHECK_THROWS_AS(obj::cross_entropy(hot, 3), std::out_of_range);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    Tensor p = random_tensor({5}, rng, 0.0, 1.0);
    double z = 0;
    for (double v : p.data()) z += v;
    for (double& v : p.data()) v /= z;
    CHECK(obj::cross_entropy(t.constant(p), i % 5).value()[0] >= 0.0);
  }
}

TEST_CASE("multitask loss") {
  std::mt19937_64 rng(6);
  const auto s = randn(200, rng), n = randn(200, rng), y = randn(200, rng);
  std::vector<double> x(200);
  for (std::size_t i = 0; i < 200; ++i) x[i] = s[i] + n[i];
  Tape t;
  Var post = t.constant(Tensor({3}, {0.2, 0.5, 0.3}));
  Var sv = t.constant(vec(s)), yv = t.constant(vec(y)), xv = t.constant(vec(x));

  obj::LossConfig cfg{0.7, 20.0};
  const auto m = obj::multitask_loss(sv, yv, xv, &post, 1, cfg);
  const double rebuilt = -0.5 * (m.parts.sdr_speech + m.parts.sdr_noise) + m.parts.alpha * m.parts.cross_entropy;
  CHECK(std::abs(rebuilt - m.parts.total) < 1e-12);
  CHECK(m.parts.cross_entropy == doctest::Approx(-std::log(0.5)));
  CHECK(m.parts.alpha == 0.7);

  obj::LossConfig no_ce{0.0, 20.0};
  const auto m0 = obj::multitask_loss(sv, yv, xv, &post, 1, no_ce);
  CHECK(m0.total.value()[0] == obj::sdr_loss(sv, yv, xv, no_ce).value()[0]);

  const auto without = obj::multitask_loss(sv, yv, xv, nullptr, 0, cfg);
  CHECK(without.parts.cross_entropy == 0.0);
  CHECK(without.total.value()[0] == obj::sdr_loss(sv, yv, xv, cfg).value()[0]);
}

TEST_CASE("metrics csv round trip") {
  std::mt19937_64 rng(7);
  std::vector<obj::UtteranceMetrics> rows;
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 5; ++i) rows.push_back({"utt" + std::to_string(i), u(rng), u(rng), u(rng), u(rng), u(rng)});
  const auto path = std::filesystem::temp_directory_path() / "sase_metrics_test.csv";
  obj::write_metrics_csv(path, rows);
  const auto back = obj::read_metrics_csv(path);
  REQUIRE(back.size() == 6);
  for (int i = 0; i < 5; ++i) CHECK(back[i] == rows[i]);
  const auto mean = obj::aggregate(rows);
  CHECK(back[5].id == "mean");
  double si = 0;
  for (const auto& r : rows) si += r.si_sdr;
  CHECK(std::abs(back[5].si_sdr - si / 5) < 1e-9);
  CHECK(back[5] == mean);
  CHECK_THROWS_AS(obj::aggregate({}), std::invalid_argument);
  CHECK_THROWS_AS(obj::read_metrics_csv(path.string() + ".missing"), DataError);
  std::filesystem::remove(path);
}
