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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rtvc/entropy.hpp"
#include "test_util.hpp"

using namespace rtvc;

namespace {

struct Plane {
  SymbolPlane symbols;
  GaussianParams params;
};

// Symbols drawn from the model they are coded with, plus optional outliers.
Plane sample_plane(Rng& rng, Shape shape, double outlier_rate = 0.0) {
  Plane p;
  p.symbols.shape = shape;
  TensorF mean(shape), scale(shape);
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double mu = rng.uniform(-20, 20);
    const double sigma = std::exp(rng.uniform(std::log(0.05), std::log(60.0)));
    mean.data()[i] = static_cast<float>(mu);
    scale.data()[i] = static_cast<float>(sigma);
    int k = static_cast<int>(std::lround(mu + sigma * rng.normal()));
    if (rng.uniform() < outlier_rate) k = rng.uniform_int(-kEscapeLimit, kEscapeLimit);
    p.symbols.symbols.push_back(k);
  }
  p.params = GaussianParams::clamped(mean, scale);
  return p;
}

// Phi by direct erf evaluation.
double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("discretized gaussian pmf") {
  CHECK(std::abs(discretized_gaussian_pmf(0, 0.0, 1.0) - 0.382925) < 1e-5);
  CHECK(discretized_gaussian_pmf(0, 0.0, 1.0) == doctest::Approx(phi(0.5) - phi(-0.5)));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const int k = rng.uniform_int(-300, 300);
    const double mu = rng.uniform(-50, 50), s = rng.uniform(0.04, 100);
    CHECK(discretized_gaussian_pmf(k, mu, s) == doctest::Approx(discretized_gaussian_pmf(-k, -mu, s)).epsilon(1e-12));
  }
  // Tail folding: the range sums to one.
  double total = 0;
  for (int k = -kSymbolMax; k <= kSymbolMax; ++k) total += discretized_gaussian_pmf(k, 30.0, 90.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("frequency tables are exact 16-bit distributions") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const FrequencyTable cdf = build_frequency_table(rng.uniform(-300, 300), rng.uniform(0.04, 256));
    CHECK(cdf.front() == 0u);
    CHECK(cdf.back() == kFrequencyTotal);
    for (std::size_t b = 0; b + 1 < cdf.size(); ++b) CHECK(cdf[b + 1] > cdf[b]);
  }
}

TEST_CASE("range coder round trips") {
  Rng rng(3);
  SUBCASE("empty plane gives an empty payload") {
    SymbolPlane empty{Shape{1, 0, 4, 4}, {}};
    const GaussianParams params{TensorF(Shape{1, 0, 4, 4}), TensorF(Shape{1, 0, 4, 4})};
    const Bitstream bits = encode(empty, params);
    CHECK(bits.bytes.empty());
    CHECK(decode(bits, params).symbols.empty());
  }
  SUBCASE("single zero symbol at the smallest scale") {
    SymbolPlane one{Shape{1, 1, 1, 1}, {0}};
    const GaussianParams params{TensorF(Shape{1, 1, 1, 1}), TensorF::constant(Shape{1, 1, 1, 1}, float(kScaleMin))};
    CHECK(decode(encode(one, params), params).symbols == one.symbols);
  }
  SUBCASE("random planes with escapes") {
    for (int trial = 0; trial < 10; ++trial) {
      const Plane p = sample_plane(rng, Shape{1, 4, 16, 16}, 0.02);
      const Bitstream bits = encode(p.symbols, p.params);
      const SymbolPlane back = decode(bits, p.params);
      CHECK(back.shape == p.symbols.shape);
      CHECK(back.symbols == p.symbols.symbols);
    }
  }
  SUBCASE("extreme symbols") {
    SymbolPlane s{Shape{1, 1, 1, 6}, {-kEscapeLimit, kEscapeLimit, -256, 256, -255, 255}};
    const GaussianParams params{TensorF(Shape{1, 1, 1, 6}), TensorF::constant(Shape{1, 1, 1, 6}, 1.0f)};
    CHECK(decode(encode(s, params), params).symbols == s.symbols);
  }
}

TEST_CASE("coder errors") {
  Rng rng(4);
  const Plane p = sample_plane(rng, Shape{1, 2, 8, 8});
  Bitstream bits = encode(p.symbols, p.params);
  REQUIRE(bits.bytes.size() > 4);
  Bitstream cut{std::vector<std::uint8_t>(bits.bytes.begin(), bits.bytes.begin() + bits.bytes.size() / 2)};
  CHECK_THROWS_AS(decode(cut, p.params), TruncatedStream);
  GaussianParams bad = p.params;
  bad.scale.data()[0] = 0.001f;
  CHECK_THROWS_AS(encode(p.symbols, bad), ScaleOutOfRange);
  SymbolPlane too_big = p.symbols;
  too_big.symbols[0] = kEscapeLimit + 1;
  CHECK_THROWS_AS(encode(too_big, p.params), std::out_of_range);
  const std::vector<std::uint8_t> framed = bits.serialize();
  CHECK(Bitstream::parse(framed).bytes == bits.bytes);
  CHECK_THROWS_AS(Bitstream::parse(std::span(framed).first(framed.size() - 1)), TruncatedStream);
}

TEST_CASE("estimate_rate examples") {
  SymbolPlane one{Shape{1, 1, 1, 1}, {0}};
  const GaussianParams unit{TensorF(Shape{1, 1, 1, 1}), TensorF::constant(Shape{1, 1, 1, 1}, 1.0f)};
  CHECK(std::abs(estimate_rate(one, unit) - (-std::log2(0.382925))) < 1e-3);
  CHECK(std::abs(estimate_rate(one, unit) - 1.3851) < 1e-3);

  SymbolPlane zeros{Shape{1, 1, 8, 8}, std::vector<std::int32_t>(64, 0)};
  const GaussianParams tight{TensorF(Shape{1, 1, 8, 8}), TensorF::constant(Shape{1, 1, 8, 8}, float(kScaleMin))};
  CHECK(estimate_rate(zeros, tight) < 1e-3);

  double previous = 0.0;
  for (int k = 0; k <= 40; ++k) {
    SymbolPlane s{Shape{1, 1, 1, 1}, {k}};
    const GaussianParams g{TensorF(Shape{1, 1, 1, 1}), TensorF::constant(Shape{1, 1, 1, 1}, 3.0f)};
    const double r = estimate_rate(s, g);
    CHECK(r >= previous);
    previous = r;
  }
}

TEST_CASE("coded length tracks estimate_rate") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Plane p = sample_plane(rng, Shape{1, 16, 16, 16}, trial % 2 == 0 ? 0.0 : 0.005);
    const double estimate = estimate_rate(p.symbols, p.params);
    const double actual = static_cast<double>(encode(p.symbols, p.params).bit_length());
    CAPTURE(estimate);
    CAPTURE(actual);
    CHECK(std::abs(actual - estimate) <= 0.02 * estimate + 32);
  }
}

TEST_CASE("differentiable rate matches estimate_rate on in-range symbols") {
  Rng rng(6);
  const Plane p = sample_plane(rng, Shape{1, 2, 8, 8});
  TensorF r(p.symbols.shape);
  for (std::size_t i = 0; i < p.symbols.symbols.size(); ++i) {
    r.data()[i] = static_cast<float>(p.symbols.symbols[i]) - p.params.mean.data()[i];
  }
  // Integer-centred case only: the rate term assumes a zero-mean residual.
  SymbolPlane centred = p.symbols;
  TensorF rounded(p.symbols.shape);
  for (std::size_t i = 0; i < centred.symbols.size(); ++i) {
    centred.symbols[i] = static_cast<std::int32_t>(std::lround(r.data()[i]));
    rounded.data()[i] = static_cast<float>(centred.symbols[i]);
  }
  const GaussianParams zero_mean{TensorF(p.symbols.shape), p.params.scale};
  CHECK(gaussian_rate_bits(rounded, p.params.scale).item() ==
        doctest::Approx(estimate_rate(centred, zero_mean)).epsilon(1e-4));
}
