/* Copyright 2026 The rtvc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <vector>

#include "doctest.h"
#include "rtvc/temporal_shift.hpp"
#include "test_util.hpp"

using namespace rtvc;
using rtvc::testing::random_tensor;

namespace {

// Shift-by-one along time of the first c/P channels, zero pre-padded.
std::vector<TensorF> stacked_oracle(const std::vector<TensorF>& xs, int P) {
  std::vector<TensorF> ys;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    TensorF y = xs[t];
    const Shape& s = y.shape();
    const int seg = s.c / P;
    for (int c = 0; c < seg; ++c)
      for (int yy = 0; yy < s.h; ++yy)
        for (int x = 0; x < s.w; ++x) y(0, c, yy, x) = t == 0 ? 0.0f : xs[t - 1](0, c, yy, x);
    ys.push_back(y);
  }
  return ys;
}

std::vector<TensorF> random_frames(Rng& rng, int T, int c, int h, int w) {
  std::vector<TensorF> xs;
  for (int t = 0; t < T; ++t) xs.push_back(random_tensor(rng, Shape{1, c, h, w}));
  return xs;
}

}  // namespace

TEST_CASE("online shift matches the stacked-array oracle") {
  Rng rng(1);
  const auto xs = random_frames(rng, 3, 8, 3, 2);
  ShiftState<TensorF> state(ShiftConfig{4});
  state.register_layer(0, 8, 3, 2);
  const auto expect = stacked_oracle(xs, 4);
  for (int t = 0; t < 3; ++t) CHECK(bit_identical(online_shift(xs[t], state, 0), expect[t]));
}

TEST_CASE("online shift edge cases") {
  Rng rng(2);
  const auto xs = random_frames(rng, 2, 8, 2, 2);
  SUBCASE("first frame gets zeros") {
    ShiftState<TensorF> state(ShiftConfig{8});
    state.register_layer(3, 8, 2, 2);
    const TensorF y = online_shift(xs[0], state, 3);
    CHECK((slice_channels(y, 0, 1).array() == 0.0f).all());
    CHECK(slice_channels(y, 1, 7) == slice_channels(xs[0], 1, 7));
  }
  SUBCASE("P = 1 is a full one-frame delay") {
    ShiftState<TensorF> state(ShiftConfig{1});
    state.register_layer(0, 8, 2, 2);
    online_shift(xs[0], state, 0);
    CHECK(online_shift(xs[1], state, 0) == xs[0]);
  }
  SUBCASE("errors") {
    ShiftState<TensorF> state(ShiftConfig{3});
    CHECK_THROWS_AS(state.register_layer(0, 8, 2, 2), ShapeError);
    ShiftState<TensorF> ok(ShiftConfig{4});
    CHECK_THROWS_AS(online_shift(xs[0], ok, 7), UnregisteredLayer);
  }
  SUBCASE("reset returns to zero state") {
    ShiftState<TensorF> state(ShiftConfig{2});
    state.register_layer(0, 8, 2, 2);
    online_shift(xs[0], state, 0);
    state.reset();
    CHECK((slice_channels(online_shift(xs[1], state, 0), 0, 4).array() == 0.0f).all());
  }
}

TEST_CASE("batch shift examples") {
  Rng rng(3);
  const TensorF frame = random_tensor(rng, Shape{1, 8, 2, 3});
  SUBCASE("N = 1 equals online shift") {
    const auto xs = random_frames(rng, 4, 8, 2, 3);
    ShiftState<TensorF> online(ShiftConfig{4});
    BatchCarry carry(ShiftConfig{4});
    online.register_layer(0, 8, 2, 3);
    carry.register_layer(0, 8, 2, 3);
    for (const TensorF& x : xs) CHECK(bit_identical(batch_shift(x, carry, 0), online_shift(x, online, 0)));
  }
  SUBCASE("identical frames with zero carry") {
    std::vector<TensorF> same(4, frame);
    const TensorF batch = concat_batch<float>(same);
    BatchCarry carry(ShiftConfig{4});
    carry.register_layer(0, 8, 2, 3);
    const TensorF y = batch_shift(batch, carry, 0);
    CHECK((slice_channels(slice_batch(y, 0), 0, 2).array() == 0.0f).all());
    for (int i = 1; i < 4; ++i) CHECK(slice_batch(y, i) == frame);
  }
}

TEST_CASE("batched and sequential shifting are bit-identical for every split") {
  Rng rng(4);
  for (int P : {1, 2, 4, 8}) {
    for (int T = 1; T <= 9; ++T) {
      const auto xs = random_frames(rng, T, 8, 2, 2);
      ShiftState<TensorF> online(ShiftConfig{P});
      online.register_layer(0, 8, 2, 2);
      std::vector<TensorF> expect;
      for (const auto& x : xs) expect.push_back(online_shift(x, online, 0));
      for (int N : {1, 2, 3, 4, 8}) {
        CAPTURE(P);
        CAPTURE(T);
        CAPTURE(N);
        BatchCarry carry(ShiftConfig{P});
        carry.register_layer(0, 8, 2, 2);
        for (int start = 0; start < T; start += N) {
          const int n = std::min(N, T - start);
          std::vector<TensorF> part(xs.begin() + start, xs.begin() + start + n);
          const TensorF y = batch_shift(concat_batch<float>(part), carry, 0);
          for (int i = 0; i < n; ++i) CHECK(bit_identical(slice_batch(y, i), expect[start + i]));
        }
      }
    }
  }
}

TEST_CASE("restart flags reproduce a sequential reset") {
  Rng rng(5);
  const auto xs = random_frames(rng, 7, 8, 2, 2);
  const int intra_period = 3;
  ShiftState<TensorF> online(ShiftConfig{4});
  online.register_layer(0, 8, 2, 2);
  std::vector<TensorF> expect;
  for (int t = 0; t < 7; ++t) {
    if (t % intra_period == 0) online.reset();
    expect.push_back(online_shift(xs[t], online, 0));
  }
  BatchCarry carry(ShiftConfig{4});
  carry.register_layer(0, 8, 2, 2);
  for (int start = 0; start < 7; start += 4) {
    const int n = std::min(4, 7 - start);
    bool restart[4] = {};
    for (int i = 0; i < n; ++i) restart[i] = (start + i) % intra_period == 0;
    std::vector<TensorF> part(xs.begin() + start, xs.begin() + start + n);
    const TensorF y = batch_shift(concat_batch<float>(part), carry, 0, std::span<const bool>(restart, n));
    for (int i = 0; i < n; ++i) CHECK(bit_identical(slice_batch(y, i), expect[start + i]));
  }
}

TEST_CASE("shift output is a selection of input and cached elements") {
  Rng rng(6);
  const auto xs = random_frames(rng, 3, 16, 3, 3);
  ShiftState<TensorF> state(ShiftConfig{4});
  state.register_layer(0, 16, 3, 3);
  for (int t = 0; t < 3; ++t) {
    const TensorF y = online_shift(xs[t], state, 0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const float v = y.data()[i];
      const bool from_current = v == xs[t].data()[i];
      const bool from_previous = t > 0 && v == xs[t - 1].data()[i];
      CHECK((from_current || from_previous || (t == 0 && v == 0.0f)));
    }
  }
}

TEST_CASE("shifting works on the autodiff tape and carries gradients to the previous frame") {
  Rng rng(7);
  Tape<float> tape;
  const VarF a = tape.parameter(random_tensor(rng, Shape{1, 4, 1, 1}));
  const VarF b = tape.parameter(random_tensor(rng, Shape{1, 4, 1, 1}));
  ShiftState<VarF> state(ShiftConfig{2});
  state.register_layer(0, 4, 1, 1);
  online_shift(a, state, 0);
  const VarF y = online_shift(b, state, 0);
  const auto g = tape.backward(sum(y));
  CHECK(g.at(a.id())(0, 0, 0, 0) == 1.0f);
  CHECK(g.at(a.id())(0, 2, 0, 0) == 0.0f);
  CHECK(g.at(b.id())(0, 0, 0, 0) == 0.0f);
  CHECK(g.at(b.id())(0, 3, 0, 0) == 1.0f);
}
