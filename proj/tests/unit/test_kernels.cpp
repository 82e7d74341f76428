// Copyright 2026 The lfm-forge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "lfm/error.hpp"
#include "lfm/kernels.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace lfm;
using lfm::testing::Gen;

TEST_CASE("rms_norm of a constant vector is one") {
  const auto out = rms_norm(Tensor::vector({3, 3, 3, 3}), Tensor({4}, 1.0f), 1e-12f);
  for (float v : out.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rms_norm keeps zeros and rejects gain mismatch") {
  const auto out = rms_norm(Tensor::vector({0, 0}), Tensor({2}, 1.0f), 1e-6f);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK_THROWS_AS(rms_norm(Tensor::vector({1, 2}), Tensor({3}, 1.0f), 1e-6f), DimensionError);
}

TEST_CASE("rms_norm matches the scalar oracle") {
  Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = g.tensor({3, 8});
    const auto gain = g.tensor({8});
    const auto ref = testing::rms_norm_ref(x, gain, 1e-5);
    CHECK(max_abs_diff(rms_norm(x, gain, 1e-5f), ref) < 1e-6);
  }
}

TEST_CASE("causal conv: impulse response and identity kernel") {
  const auto z = depthwise_causal_conv(Tensor({3, 1}, {1, 0, 0}), Tensor({1, 3}, {1, 2, 3}),
                                       Tensor({1}, 0.0f));
  CHECK(z.values() == std::vector<float>{1, 2, 3});
  Gen g(3);
  const auto y = g.tensor({5, 2});
  const auto id = depthwise_causal_conv(y, Tensor({2, 3}, {1, 0, 0, 1, 0, 0}), Tensor({2}, 0.0f));
  CHECK(bit_identical(id, y));
}

TEST_CASE("causal conv matches the double-loop oracle") {
  Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = g.tensor({16, 4});
    const auto w = g.tensor({4, 3});
    const auto b = g.tensor({4});
    CHECK(max_abs_diff(depthwise_causal_conv(y, w, b), testing::causal_conv_ref(y, w, b)) < 1e-6);
  }
}

TEST_CASE("causal conv: future perturbations leave the past bit-identical") {
  Gen g(9);
  const auto w = g.tensor({3, 4});
  const auto b = g.tensor({3});
  for (int trial = 0; trial < 30; ++trial) {
    auto y = g.tensor({12, 3});
    const auto z0 = depthwise_causal_conv(y, w, b);
    const std::size_t t = g.index(0, 10);
    for (std::size_t r = t + 1; r < 12; ++r) {
      for (auto& v : y.row(r)) v += float(g.normal());
    }
    const auto z1 = depthwise_causal_conv(y, w, b);
    for (std::size_t r = 0; r <= t; ++r) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(z0.at(r, c) == z1.at(r, c));
    }
  }
}

TEST_CASE("rope: position zero is the identity and norms are preserved") {
  Gen g(4);
  const auto x = g.tensor({6, 2, 8});
  const auto r = rope_rotate(x, 10000.0f);
  for (std::size_t i = 0; i < 16; ++i) CHECK(r[i] == x[i]);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t h = 0; h < 2; ++h) {
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        const std::size_t i = (t * 2 + h) * 8 + j;
        a += double(x[i]) * x[i];
        b += double(r[i]) * r[i];
      }
      CHECK(std::abs(std::sqrt(a) - std::sqrt(b)) < 1e-5);
    }
  }
}

TEST_CASE("rope: single pair rotation by one radian") {
  const auto r = rope_rotate(Tensor({2, 1, 2}, {0, 0, 1, 0}), 10000.0f);
  CHECK(r[2] == doctest::Approx(std::cos(1.0)).epsilon(1e-6));
  CHECK(r[3] == doctest::Approx(std::sin(1.0)).epsilon(1e-6));
  CHECK_THROWS_AS(rope_rotate(Tensor({1, 1, 3}), 10000.0f), ConfigError);
}

TEST_CASE("softmax: closed forms, stability, masking") {
  auto u = softmax_last(Tensor::vector({0, 0, 0}));
  for (float v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
  auto s = softmax_last(Tensor::vector({1000, -1000}));
  CHECK(s[0] == 1.0f);
  CHECK(s[1] == 0.0f);
  auto h = softmax_last(Tensor::vector({0.0f, float(std::log(2.0)), float(std::log(3.0))}));
  CHECK(h[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
  CHECK(h[2] == doctest::Approx(0.5).epsilon(1e-6));
  const std::vector<std::uint8_t> mask{1, 0, 1};
  auto m = softmax_last(Tensor::vector({1, 5, 1}), mask);
  CHECK(m[1] == 0.0f);
  CHECK(m[0] == doctest::Approx(0.5));
  const std::vector<std::uint8_t> none{0, 0};
  CHECK_THROWS_AS(softmax_last(Tensor::vector({1, 2}), none), DomainError);
}

TEST_CASE("softmax rows sum to one for extreme magnitudes") {
  Gen g(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = g.tensor({4, 7}, 1e4);
    const auto s = softmax_last(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (float v : s.row(r)) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("swiglu: zero input, scalar case, oracle") {
  Gen g(12);
  const auto wg = g.tensor({4, 8}), wu = g.tensor({4, 8}), wd = g.tensor({8, 4});
  const auto zero = swiglu(Tensor({2, 4}), wg, wu, wd);
  for (float v : zero.data()) CHECK(v == 0.0f);
  const Tensor one({1, 1}, 1.0f);
  CHECK(swiglu(Tensor({1}, 1.0f), one, one, one)[0] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-6));
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = g.tensor({3, 4});
    CHECK(max_abs_diff(swiglu(x, wg, wu, wd), testing::swiglu_ref(x, wg, wu, wd)) < 1e-5);
  }
}

TEST_CASE("fd_gradient on closed forms") {
  const auto sq = fd_gradient(
      [](const Tensor& x) { return double(x[0]) * x[0] + double(x[1]) * x[1]; },
      Tensor::vector({1, 2}), 1e-4);
  CHECK(sq[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sq[1] == doctest::Approx(4.0).epsilon(1e-5));
  const auto prod =
      fd_gradient([](const Tensor& x) { return double(x[0]) * x[1]; }, Tensor::vector({3, 5}));
  CHECK(prod[0] == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(prod[1] == doctest::Approx(3.0).epsilon(1e-5));
  const auto flat = fd_gradient([](const Tensor&) { return 4.0; }, Tensor::vector({1, 2, 3}));
  for (float v : flat.data()) CHECK(v == 0.0f);
}

TEST_CASE("fd_gradient reports the index of a non-finite evaluation") {
  try {
    fd_gradient([](const Tensor& x) { return x[1] > 1.0f ? std::log(-1.0) : 0.0; },
                Tensor::vector({0, 1, 0}));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("matmul agrees with a naive triple loop") {
  Gen g(2);
  const auto x = g.tensor({20, 5}), w = g.tensor({5, 3});
  const auto y = matmul(x, w);
  for (std::size_t r = 0; r < 20; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 5; ++i) acc += double(x.at(r, i)) * w.at(i, c);
      CHECK(std::abs(y.at(r, c) - acc) < 1e-5);
    }
  }
  CHECK_THROWS_AS(matmul(x, g.tensor({4, 3})), DimensionError);
}
