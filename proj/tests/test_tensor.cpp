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

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace rtvc;
using rtvc::testing::random_tensor;

namespace {

// Every finite binary16 value, decoded from its bit pattern.
std::vector<double> fp16_table() {
  std::vector<double> v;
  for (int bits = 0; bits < 0x7C00; ++bits) {
    const int exp = bits >> 10, man = bits & 0x3FF;
    const double mag = exp == 0 ? std::ldexp(man, -24) : std::ldexp(1024 + man, exp - 25);
    v.push_back(mag);
  }
  return v;
}

// Nearest table entry; ties go to the even bit pattern (even index).
double nearest(const std::vector<double>& table, double x, double overflow_at) {
  const double a = std::abs(x);
  if (a >= overflow_at) return std::copysign(std::numeric_limits<double>::infinity(), x);
  auto it = std::lower_bound(table.begin(), table.end(), a);
  std::size_t hi = static_cast<std::size_t>(it - table.begin());
  if (hi == table.size()) return std::copysign(table.back(), x);
  if (hi == 0 || table[hi] == a) return std::copysign(table[hi], x);
  const std::size_t lo = hi - 1;
  const double dl = a - table[lo], dh = table[hi] - a;
  const std::size_t pick = dl < dh ? lo : dh < dl ? hi : (lo % 2 == 0 ? lo : hi);
  return std::copysign(table[pick], x);
}

// Naive direct cross-correlation in double.
TensorD brute_conv(const TensorF& x, const TensorF& w, const TensorF& b, int stride, int pad) {
  const Shape& is = x.shape();
  const Shape& ws = w.shape();
  const int k = ws.h;
  const int oh = (is.h + 2 * pad - k) / stride + 1, ow = (is.w + 2 * pad - k) / stride + 1;
  TensorD out(Shape{is.n, ws.n, oh, ow});
  for (int n = 0; n < is.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = b.data()[o];
          for (int i = 0; i < is.c; ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || ix < 0 || iy >= is.h || ix >= is.w) continue;
                acc += double(w(o, i, ky, kx)) * x(n, i, iy, ix);
              }
          out(n, o, y, xx) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("round_to_precision spot values") {
  CHECK(round_to_precision(1.0f, PrecisionMode::BF16Emu) == 1.0f);
  CHECK(round_to_precision(3.14159265f, PrecisionMode::BF16Emu) == 3.140625f);
  CHECK(std::isinf(round_to_precision(65520.0f, PrecisionMode::FP16Emu)));
  CHECK(round_to_precision(65520.0f, PrecisionMode::FP16Emu) > 0);
  CHECK(round_to_precision(65504.0f, PrecisionMode::FP16Emu) == 65504.0f);
  CHECK(round_to_precision(65519.0f, PrecisionMode::FP16Emu) == 65504.0f);
  CHECK(round_to_precision(-65520.0f, PrecisionMode::FP16Emu) == -std::numeric_limits<float>::infinity());
  CHECK(round_to_precision(std::ldexp(1.0f, -24), PrecisionMode::FP16Emu) == std::ldexp(1.0f, -24));
  CHECK(round_to_precision(std::ldexp(1.0f, -26), PrecisionMode::FP16Emu) == 0.0f);
  CHECK(round_to_precision(0.7f, PrecisionMode::FP32) == 0.7f);
}

TEST_CASE("fp16 rounding matches the binary16 table under round-to-nearest-even") {
  const std::vector<double> table = fp16_table();
  // Halfway between 65504 and the next step (65536) overflows.
  const double overflow_at = 65520.0;
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const int e = rng.uniform_int(-30, 17);
    const float x = static_cast<float>((rng.uniform() < 0.5 ? -1 : 1) * std::ldexp(1.0 + rng.uniform(), e));
    CHECK(double(round_to_precision(x, PrecisionMode::FP16Emu)) == nearest(table, x, overflow_at));
  }
  // Exact ties, including the subnormal range.
  for (std::size_t i = 0; i + 1 < table.size(); i += 97) {
    const float mid = static_cast<float>(0.5 * (table[i] + table[i + 1]));
    CHECK(double(round_to_precision(mid, PrecisionMode::FP16Emu)) == nearest(table, mid, overflow_at));
  }
}

TEST_CASE("bf16 rounding matches the bf16 table and never overflows below its max") {
  std::vector<double> table;
  for (std::uint32_t bits = 0; bits < 0x7F80; ++bits) table.push_back(std::bit_cast<float>(bits << 16));
  Rng rng(12);
  for (int i = 0; i < 20000; ++i) {
    const float x = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next()) & 0x7F7FFFFFu);
    const float r = round_to_precision(x, PrecisionMode::BF16Emu);
    CHECK(double(r) == nearest(table, x, std::numeric_limits<double>::infinity()));
    if (x < 3.3895e38f) CHECK(std::isfinite(r));
  }
  CHECK(std::isfinite(round_to_precision(1e38f, PrecisionMode::BF16Emu)));
  CHECK(std::isfinite(round_to_precision(65520.0f, PrecisionMode::BF16Emu)));
}

TEST_CASE("emulated-precision ops are closed under re-rounding") {
  Rng rng(3);
  for (PrecisionMode mode : {PrecisionMode::FP16Emu, PrecisionMode::BF16Emu}) {
    TensorF x = random_tensor(rng, Shape{2, 4, 6, 6}, -3, 3);
    x.set_precision(mode);
    const TensorF w = random_tensor(rng, Shape{8, 4, 3, 3});
    const TensorF b = random_tensor(rng, Shape{1, 8, 1, 1});
    const TensorF fp32 = random_tensor(rng, Shape{2, 4, 6, 6});
    const TensorF flow = random_tensor(rng, Shape{1, 2, 6, 6}, -1.5, 1.5);
    const std::vector<TensorF> outs = {conv2d(x, w, b, 1, 1), silu(x),        softplus(x),
                                       mul_scalar(x, 1.37f),  add(x, fp32),   mul(fp32, x),
                                       concat_channels(x, x), downsample2x(x), upsample2x(x),
                                       pixel_unshuffle(x, 2), bilinear_sample(x, flow)};
    for (const TensorF& o : outs) {
      CHECK(o.precision() == mode);
      for (float v : o.span()) CHECK(round_to_precision(v, mode) == v);
    }
  }
}

TEST_CASE("conv2d examples and brute-force oracle") {
  SUBCASE("1x1 identity kernel") {
    Rng rng(1);
    const TensorF x = random_tensor(rng, Shape{1, 3, 4, 5});
    TensorF w(Shape{3, 3, 1, 1});
    for (int i = 0; i < 3; ++i) w(i, i, 0, 0) = 1.0f;
    CHECK(conv2d(x, w, TensorF(Shape{1, 3, 1, 1}), 1, 0) == x);
  }
  SUBCASE("all-ones 3x3 on all-ones 5x5") {
    const TensorF x = TensorF::constant(Shape{1, 1, 5, 5}, 1.0f);
    const TensorF w = TensorF::constant(Shape{1, 1, 3, 3}, 1.0f);
    const TensorF y = conv2d(x, w, TensorF(Shape{1, 1, 1, 1}), 1, 1);
    CHECK(y.shape() == (Shape{1, 1, 5, 5}));
    CHECK(y(0, 0, 2, 2) == 9.0f);
    CHECK(y(0, 0, 0, 0) == 4.0f);
  }
  SUBCASE("random instances against the quadruple loop") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const int k = 1 + 2 * rng.uniform_int(0, 2), stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, k / 2);
      const Shape is{rng.uniform_int(1, 3), rng.uniform_int(1, 4), rng.uniform_int(k, 9), rng.uniform_int(k, 9)};
      const TensorF x = random_tensor(rng, is);
      const TensorF w = random_tensor(rng, Shape{rng.uniform_int(1, 4), is.c, k, k});
      const TensorF b = random_tensor(rng, Shape{1, w.shape().n, 1, 1});
      const TensorF y = conv2d(x, w, b, stride, pad);
      const TensorD ref = brute_conv(x, w, b, stride, pad);
      REQUIRE(y.shape() == ref.shape());
      for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-5));
    }
  }
  SUBCASE("the 2x3x4x4 instance is exactly the float quadruple loop") {
    Rng rng(4);
    const TensorF x = random_tensor(rng, Shape{2, 3, 4, 4});
    const TensorF w = random_tensor(rng, Shape{2, 3, 3, 3});
    const TensorF b = random_tensor(rng, Shape{1, 2, 1, 1});
    const TensorF y = conv2d(x, w, b, 1, 1);
    // Same accumulation order in float: bias, then channels, rows, columns.
    for (int n = 0; n < 2; ++n)
      for (int o = 0; o < 2; ++o)
        for (int yy = 0; yy < 4; ++yy)
          for (int xx = 0; xx < 4; ++xx) {
            float acc = b.data()[o];
            for (int i = 0; i < 3; ++i)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = yy - 1 + ky, ix = xx - 1 + kx;
                  if (iy < 0 || ix < 0 || iy >= 4 || ix >= 4) continue;
                  acc += w(o, i, ky, kx) * x(n, i, iy, ix);
                }
            CHECK(y(n, o, yy, xx) == acc);
          }
  }
  SUBCASE("shape errors") {
    const TensorF x(Shape{1, 3, 4, 4});
    CHECK_THROWS_AS(conv2d(x, TensorF(Shape{1, 2, 3, 3}), TensorF(Shape{1, 1, 1, 1}), 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(x, TensorF(Shape{1, 3, 2, 2}), TensorF(Shape{1, 1, 1, 1}), 1, 1), ShapeError);
  }
}

TEST_CASE("batch packing does not change results") {
  Rng rng(5);
  const TensorF w = random_tensor(rng, Shape{6, 4, 3, 3});
  const TensorF b = random_tensor(rng, Shape{1, 6, 1, 1});
  std::vector<TensorF> parts;
  for (int i = 0; i < 5; ++i) {
    TensorF p = random_tensor(rng, Shape{1, 4, 8, 8}, -2, 2);
    p.set_precision(PrecisionMode::BF16Emu);
    parts.push_back(p);
  }
  const TensorF batch = concat_batch<float>(parts);
  const TensorF yb = silu(conv2d(batch, w, b, 1, 1));
  for (int i = 0; i < 5; ++i) {
    CHECK(bit_identical(slice_batch(yb, i), silu(conv2d(parts[i], w, b, 1, 1))));
  }
}

TEST_CASE("pixel shuffle round trip and shapes") {
  Rng rng(6);
  CHECK(pixel_unshuffle(TensorF(Shape{1, 3, 8, 8}), 8).shape() == (Shape{1, 192, 1, 1}));
  CHECK(pixel_shuffle(TensorF(Shape{1, 192, 1, 1}), 8).shape() == (Shape{1, 3, 8, 8}));
  const TensorF x = random_tensor(rng, Shape{2, 3, 4, 6});
  CHECK(pixel_unshuffle(x, 1) == x);
  CHECK(pixel_shuffle(x, 1) == x);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = rng.uniform_int(1, 4);
    const TensorF t = random_tensor(rng, Shape{rng.uniform_int(1, 2), rng.uniform_int(1, 3), s * rng.uniform_int(1, 3),
                                               s * rng.uniform_int(1, 3)});
    CHECK(pixel_shuffle(pixel_unshuffle(t, s), s) == t);
    const TensorF u = random_tensor(rng, Shape{1, s * s * rng.uniform_int(1, 3), rng.uniform_int(1, 3), 2});
    CHECK(pixel_unshuffle(pixel_shuffle(u, s), s) == u);
  }
  // Standard space-to-depth order: channel c*s*s + dy*s + dx.
  TensorF img(Shape{1, 1, 2, 2});
  img(0, 0, 0, 0) = 1;
  img(0, 0, 0, 1) = 2;
  img(0, 0, 1, 0) = 3;
  img(0, 0, 1, 1) = 4;
  const TensorF d = pixel_unshuffle(img, 2);
  CHECK(d(0, 0, 0, 0) == 1);
  CHECK(d(0, 1, 0, 0) == 2);
  CHECK(d(0, 2, 0, 0) == 3);
  CHECK(d(0, 3, 0, 0) == 4);
  CHECK_THROWS_AS(pixel_unshuffle(TensorF(Shape{1, 1, 3, 4}), 2), ShapeError);
  CHECK_THROWS_AS(pixel_shuffle(TensorF(Shape{1, 3, 2, 2}), 2), ShapeError);
}

TEST_CASE("elementwise examples") {
  TensorF x(Shape{1, 1, 1, 2});
  x.data()[0] = -1;
  x.data()[1] = 2;
  const TensorF r = relu(x);
  CHECK(r.data()[0] == 0.0f);
  CHECK(r.data()[1] == 2.0f);
  CHECK(silu(TensorF::scalar(0.0f)).item() == 0.0f);
  CHECK(concat_channels(TensorF(Shape{1, 4, 2, 2}), TensorF(Shape{1, 6, 2, 2})).shape() == (Shape{1, 10, 2, 2}));
  CHECK_THROWS_AS(add(TensorF(Shape{1, 4, 2, 2}), TensorF(Shape{1, 4, 2, 3})), ShapeError);
  CHECK_THROWS_AS(concat_channels(TensorF(Shape{1, 4, 2, 2}), TensorF(Shape{1, 4, 3, 2})), ShapeError);
}

TEST_CASE("resampling") {
  const TensorF c = TensorF::constant(Shape{1, 2, 4, 6}, 0.75f);
  const TensorF d = downsample2x(c);
  CHECK(d.shape() == (Shape{1, 2, 2, 3}));
  CHECK((d.array() == 0.75f).all());
  CHECK(upsample2x(d) == c);
  TensorF q(Shape{1, 1, 2, 2});
  q(0, 0, 0, 0) = 1;
  q(0, 0, 0, 1) = 3;
  q(0, 0, 1, 0) = 5;
  q(0, 0, 1, 1) = 7;
  CHECK(downsample2x(q).item() == 4.0f);
  CHECK_THROWS_AS(downsample2x(TensorF(Shape{1, 1, 3, 2})), ShapeError);
}

TEST_CASE("bilinear sampling") {
  Rng rng(7);
  const TensorF x = random_tensor(rng, Shape{1, 2, 5, 7});
  CHECK(bilinear_sample(x, TensorF(Shape{1, 2, 5, 7})) == x);

  TensorF ramp(Shape{1, 1, 4, 6});
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 6; ++xx) ramp(0, 0, y, xx) = float(xx + 10 * y);
  TensorF flow(Shape{1, 2, 4, 6});
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 6; ++xx) flow(0, 0, y, xx) = 1.0f;
  const TensorF shifted = bilinear_sample(ramp, flow);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 5; ++xx) CHECK(shifted(0, 0, y, xx) == ramp(0, 0, y, xx + 1));
  CHECK(shifted(0, 0, 0, 5) == ramp(0, 0, 0, 5));  // border clamp

  TensorF row(Shape{1, 1, 1, 2});
  row.data()[0] = 2.0f;
  row.data()[1] = 5.0f;
  TensorF half(Shape{1, 2, 1, 2});
  half(0, 0, 0, 0) = 0.5f;
  CHECK(bilinear_sample(row, half)(0, 0, 0, 0) == 3.5f);
}

TEST_CASE("adjoint pairs satisfy <Ax, y> == <x, A^T y>") {
  Rng rng(8);
  auto dot = [](const TensorF& a, const TensorF& b) {
    return (a.array().cast<double>() * b.array().cast<double>()).sum();
  };
  const TensorF x = random_tensor(rng, Shape{1, 2, 3, 4});
  const TensorF y = random_tensor(rng, Shape{1, 2, 6, 8});
  CHECK(dot(upsample2x(x), y) == doctest::Approx(dot(x, upsample2x_adjoint(y))).epsilon(1e-6));
  const TensorF img = random_tensor(rng, Shape{1, 2, 5, 6});
  const TensorF flow = random_tensor(rng, Shape{1, 2, 5, 6}, -2.5, 2.5);
  const TensorF g = random_tensor(rng, Shape{1, 2, 5, 6});
  CHECK(dot(bilinear_sample(img, flow), g) == doctest::Approx(dot(img, bilinear_sample_adjoint(g, flow))).epsilon(1e-6));
}
