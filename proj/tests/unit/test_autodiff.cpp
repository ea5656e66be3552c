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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "sase/autodiff/adam.hpp"
#include "sase/autodiff/checkpoint.hpp"
#include "sase/autodiff/ops.hpp"
#include "support/gradcheck.hpp"

using namespace sase;
using sase::testing::check_gradients;
using sase::testing::random_tensor;

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("forward primitives on hand-checked values") {
  Tape tape;
  auto a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  auto eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  CHECK(ops::matmul(a, eye).value() == a.value());

  auto zero = tape.constant(Tensor::zeros({3, 2}));
  CHECK(ops::tanh(zero).value() == Tensor::zeros({3, 2}));

  auto v = tape.constant(Tensor::vector({1, 2, 3, 4}));
  CHECK(ops::mean(v).value()[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("shape errors name the operation and shapes") {
  Tape tape;
  auto a = tape.constant(Tensor::zeros({2, 3}));
  auto b = tape.constant(Tensor::zeros({2, 2}));
  try {
    ops::add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ops::broadcast(a, {2, 3, 1}), ShapeError);
  CHECK_THROWS_AS(ops::slice(a, 1, 2, 2), ShapeError);

  Tape other;
  auto c = other.constant(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(ops::add(a, c), std::invalid_argument);
}

TEST_CASE("backward basics") {
  Tape tape;
  auto x = tape.variable(Tensor::vector({1, 2, 3}));
  auto root = ops::sum(ops::mul(x, x));
  tape.backward(root);
  CHECK(tape.grad(x) == Tensor::vector({2, 4, 6}));

  SUBCASE("constant root yields zero gradients") {
    Tape t2;
    auto y = t2.variable(Tensor::vector({1, 2}));
    auto c = t2.constant(Tensor::vector({5, 6}));
    t2.backward(ops::sum(c));
    CHECK(t2.grad(y) == Tensor::zeros({2}));
  }
  SUBCASE("non-scalar root is rejected") { CHECK_THROWS_AS(tape.backward(x), std::invalid_argument); }
  SUBCASE("detached root is rejected") {
    CHECK_THROWS_AS(tape.backward(Var{}), std::invalid_argument);
    Tape t3;
    auto r = t3.variable(Tensor::scalar(1.0));
    CHECK_THROWS_AS(tape.backward(r), std::invalid_argument);
  }
}

TEST_CASE("parameter sinks accumulate across tapes") {
  Tensor w = Tensor::vector({0.5, -1.0});
  Tensor sink = Tensor::zeros({2});
  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    auto p = tape.parameter(w, &sink);
    tape.backward(ops::sum(ops::scale(p, 3.0)));
  }
  CHECK(sink == Tensor::vector({6.0, 6.0}));
  Tape tape;
  CHECK_THROWS_AS(tape.parameter(w, &(sink = Tensor::zeros({3}))), ShapeError);
}

TEST_CASE("every primitive matches central finite differences") {
  std::mt19937_64 rng(7);
  using testing::GraphFn;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    GraphFn fn;
  };
  // Each graph ends in a weighted sum so that every output entry matters.
  auto weighted = [](Var y) {
    Tape& t = *y.tape();
    Tensor w(y.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
    return ops::sum(ops::mul(y, t.constant(w)));
  };
  std::vector<Case> cases = {
      {"add", {{3, 4}, {3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::add(v[0], v[1])); }},
      {"sub", {{3, 4}, {3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::sub(v[0], v[1])); }},
      {"mul", {{3, 4}, {3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::mul(v[0], v[1])); }},
      {"tanh", {{5}}, [&](Tape&, const auto& v) { return weighted(ops::tanh(v[0])); }},
      {"sigmoid", {{5}}, [&](Tape&, const auto& v) { return weighted(ops::sigmoid(v[0])); }},
      {"exp", {{5}}, [&](Tape&, const auto& v) { return weighted(ops::exp(v[0])); }},
      {"log", {{5}}, [&](Tape&, const auto& v) { return weighted(ops::log(ops::add_scalar(ops::square(v[0]), 0.5))); }},
      {"leaky_relu", {{6}}, [&](Tape&, const auto& v) { return weighted(ops::leaky_relu(v[0])); }},
      {"matmul", {{3, 4}, {4, 2}}, [&](Tape&, const auto& v) { return weighted(ops::matmul(v[0], v[1])); }},
      {"transpose", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::transpose(v[0])); }},
      {"reshape", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::reshape(v[0], {2, 6})); }},
      {"concat0", {{2, 3}, {1, 3}}, [&](Tape&, const auto& v) { return weighted(ops::concat({v[0], v[1]}, 0)); }},
      {"concat1", {{2, 3}, {2, 2}}, [&](Tape&, const auto& v) { return weighted(ops::concat({v[0], v[1]}, 1)); }},
      {"slice", {{4, 5}}, [&](Tape&, const auto& v) { return weighted(ops::slice(v[0], 1, 1, 4)); }},
      {"reverse", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::reverse(v[0], 1)); }},
      {"broadcast", {{3, 1}}, [&](Tape&, const auto& v) { return weighted(ops::broadcast(v[0], {3, 4})); }},
      {"sum_axis", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::sum_axis(v[0], 0)); }},
      {"mean_axis", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::mean_axis(v[0], 1)); }},
      {"softmax", {{3, 4}}, [&](Tape&, const auto& v) { return weighted(ops::softmax(v[0])); }},
      {"conv2d", {{2, 5, 4}, {3, 2, 3, 3}, {3}},
       [&](Tape&, const auto& v) { return weighted(ops::conv2d(v[0], v[1], v[2], {1, 1}, {1, 1})); }},
      {"conv2d_strided", {{2, 6, 5}, {2, 2, 3, 2}, {2}},
       [&](Tape&, const auto& v) { return weighted(ops::conv2d(v[0], v[1], v[2], {0, 1}, {2, 2})); }},
      {"instance_norm", {{2, 3, 4}, {2}, {2}},
       [&](Tape&, const auto& v) { return weighted(ops::instance_norm(v[0], v[1], v[2])); }},
      {"layer_norm", {{4, 3}, {4}, {4}},
       [&](Tape&, const auto& v) { return weighted(ops::layer_norm(v[0], v[1], v[2])); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng));
    auto report = check_gradients(c.fn, inputs, 0, 1);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("adjoint is linear in the root") {
  std::mt19937_64 rng(3);
  Tensor x0 = random_tensor({4}, rng);
  auto build = [](Tape& t, Var x, int which) {
    Var r1 = ops::sum(ops::tanh(ops::mul(x, x)));
    Var r2 = ops::sum(ops::exp(ops::scale(x, 0.5)));
    (void)t;
    return which == 0 ? r1 : which == 1 ? r2 : ops::add(r1, r2);
  };
  Tensor g[3];
  for (int k = 0; k < 3; ++k) {
    Tape tape;
    auto x = tape.variable(x0);
    tape.backward(build(tape, x, k));
    g[k] = tape.grad(x);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(g[2][i] == doctest::Approx(g[0][i] + g[1][i]).epsilon(1e-14));
}

TEST_CASE("adam") {
  ParamStore params;
  params.add("p", Tensor::scalar(0.0));
  ParamStore grads = params.zeros_like();

  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState st(params, 1e-3);
    adam_step(params, grads, st);
    CHECK(params.get("p")[0] == 0.0);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    AdamState st(params, 1e-3);
    grads.get("p")[0] = 1.0;
    adam_step(params, grads, st);
    // m = 0.1, v = 0.001; bias corrected both are 1, so p = -lr / (1 + eps).
    CHECK(params.get("p")[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("constant gradient decreases monotonically") {
    AdamState st(params, 1e-3);
    grads.get("p")[0] = 1.0;
    double prev = 0.0;
    for (int i = 0; i < 100; ++i) {
      adam_step(params, grads, st);
      CHECK(params.get("p")[0] < prev);
      prev = params.get("p")[0];
    }
    CHECK(st.step == 100);
  }
  SUBCASE("deterministic") {
    ParamStore p2 = params;
    AdamState s1(params, 1e-2), s2(p2, 1e-2);
    grads.get("p")[0] = 0.37;
    for (int i = 0; i < 5; ++i) {
      adam_step(params, grads, s1);
      adam_step(p2, grads, s2);
    }
    CHECK(params == p2);
  }
  SUBCASE("non-finite gradient is reported by name") {
    AdamState st(params, 1e-3);
    grads.get("p")[0] = std::numeric_limits<double>::quiet_NaN();
    try {
      adam_step(params, grads, st);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("'p'") != std::string::npos);
    }
    CHECK(st.step == 0);
  }
  SUBCASE("learning rate must be positive") {
    AdamState st(params, 0.0);
    CHECK_THROWS_AS(adam_step(params, grads, st), std::invalid_argument);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(11);
  ParamStore store;
  store.add("layer.weight", random_tensor({3, 4}, rng));
  store.add("layer.bias", Tensor::vector({-0.0, std::numeric_limits<double>::denorm_min(), 1e300}));
  store.add("odd name/with.dots", random_tensor({2, 1, 2}, rng));
  const auto dir = std::filesystem::temp_directory_path() / "sase_ckpt_test";
  std::filesystem::remove_all(dir);
  save_tensors(dir / "params", store);
  ParamStore back = load_tensors(dir / "params");
  REQUIRE(back.size() == store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    CHECK(back.names()[i] == store.names()[i]);
    CHECK(std::memcmp(back.value(i).raw(), store.value(i).raw(), store.value(i).size() * 8) == 0);
  }

  std::filesystem::resize_file(dir / "params.bin", std::filesystem::file_size(dir / "params.bin") - 3);
  CHECK_THROWS_AS(load_tensors(dir / "params"), DataError);
  CHECK_THROWS_AS(load_tensors(dir / "missing"), DataError);
  std::filesystem::remove_all(dir);
}
