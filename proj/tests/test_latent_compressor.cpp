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
#include "rtvc/latent_compressor.hpp"
#include "test_util.hpp"

using namespace rtvc;
using rtvc::testing::fnv1a;
using rtvc::testing::hex;
using rtvc::testing::random_tensor;

namespace {

TensorF with_precision(TensorF t, PrecisionMode p) {
  t.set_precision(p);
  return t;
}

const Model& model() {
  static const Model m = init_model(ModelConfig::desk(), 11);
  return m;
}

Model zero_model() {
  Model m = init_model(ModelConfig::desk(), 11);
  for (auto& [name, w] : m.weights) {
    if (name != "config") w = TensorF(w.shape());
  }
  return m;
}

TensorF latent_of(const TensorF& frame) {
  return with_precision(to_latent(frame, 8), PrecisionMode::FP16Emu);
}

}  // namespace

TEST_CASE("latent layout") {
  Rng rng(1);
  const TensorF frame = random_tensor(rng, Shape{1, 3, 64, 64}, 0, 1);
  CHECK(to_latent(frame, 8).shape() == Shape{1, 192, 8, 8});
  CHECK(from_latent(to_latent(frame, 8), 8) == frame);
  CHECK(to_latent(frame, 1) == frame);
  CHECK_THROWS_AS(to_latent(random_tensor(rng, Shape{1, 3, 12, 16}), 8), ShapeError);
}

TEST_CASE("temporal contexts") {
  const ModelConfig& cfg = model().config;
  Rng rng(2);
  const TensorF prev = random_tensor(rng, Shape{1, cfg.latent_channels, 4, 6});
  const auto ctx = extract_contexts(prev, model().weights);
  CHECK(ctx.mix.shape() == Shape{1, cfg.context_channels, 4, 6});
  CHECK(ctx.entropy.shape() == Shape{1, cfg.context_channels, 4, 6});
  CHECK(extract_contexts(prev, model().weights).mix == ctx.mix);
  // Golden values from the reference build.
  CHECK(hex(fnv1a(ctx.mix)) == "b7e62c272c4848a1");
  CHECK(hex(fnv1a(ctx.entropy)) == "b6870da84c779cb7");

  const Model zero = zero_model();
  const auto z = extract_contexts(TensorF(prev.shape()), zero.weights);
  CHECK((z.mix.array() == 0.0f).all());
  CHECK((z.entropy.array() == 0.0f).all());
  CHECK_THROWS(extract_contexts(TensorF(Shape{1, cfg.latent_channels + 1, 4, 4}), model().weights));
}

TEST_CASE("encoder and decoder agree bit-exactly along a predicted chain") {
  const ModelConfig& cfg = model().config;
  Rng rng(3);
  for (int q : {0, 7, 15}) {
    CAPTURE(q);
    auto ctx = zero_contexts(cfg, 4, 4, PrecisionMode::FP16Emu);
    TensorF enc_prev, dec_prev;
    for (int t = 0; t < 4; ++t) {
      const TensorF raw = latent_of(random_tensor(rng, Shape{1, 3, 32, 32}, 0, 1));
      const auto enc_ctx = t == 0 ? ctx : extract_contexts(enc_prev, model().weights);
      const auto dec_ctx = t == 0 ? ctx : extract_contexts(dec_prev, model().weights);
      const LatentEncoding e = encode_latent(raw, enc_ctx, q, model().weights);
      const TensorF d = decode_latent(e.bits, dec_ctx, q, model().weights);
      CHECK(e.latent.shape() == Shape{1, cfg.latent_channels, 4, 4});
      CHECK(bit_identical(e.latent, d));
      CHECK(e.latent.precision() == PrecisionMode::FP16Emu);
      enc_prev = e.latent;
      dec_prev = d;
    }
  }
}

TEST_CASE("encode_latent validates its inputs") {
  const auto ctx = zero_contexts(model().config, 4, 4, PrecisionMode::FP16Emu);
  Rng rng(4);
  const TensorF raw = latent_of(random_tensor(rng, Shape{1, 3, 32, 32}, 0, 1));
  CHECK_THROWS_AS(encode_latent(raw, ctx, 16, model().weights), std::out_of_range);
  CHECK_THROWS_AS(encode_latent(raw, ctx, -1, model().weights), std::out_of_range);
  const auto wrong = zero_contexts(model().config, 2, 2, PrecisionMode::FP16Emu);
  CHECK_THROWS(encode_latent(raw, wrong, 3, model().weights));
}

TEST_CASE("zero input with zero weights codes all-zero symbols") {
  const Model zero = zero_model();
  const auto ctx = zero_contexts(zero.config, 4, 4, PrecisionMode::FP16Emu);
  const LatentEncoding e = encode_latent(TensorF(Shape{1, 192, 4, 4}, PrecisionMode::FP16Emu), ctx, 5,
                                         zero.weights);
  for (auto s : e.symbols.symbols) CHECK(s == 0);
  // Every symbol sits at the smallest scale, so the payload is a few bytes.
  CHECK(e.bits.bytes.size() <= 8);
}

TEST_CASE("corrupted payloads never crash the decoder") {
  const auto ctx = zero_contexts(model().config, 4, 4, PrecisionMode::FP16Emu);
  Rng rng(5);
  const TensorF raw = latent_of(random_tensor(rng, Shape{1, 3, 32, 32}, 0, 1));
  const LatentEncoding e = encode_latent(raw, ctx, 9, model().weights);
  for (int trial = 0; trial < 32; ++trial) {
    Bitstream bad = e.bits;
    bad.bytes[rng.uniform_int(0, static_cast<int>(bad.bytes.size()) - 1)] ^=
        static_cast<std::uint8_t>(1 + rng.uniform_int(0, 254));
    try {
      const TensorF d = decode_latent(bad, ctx, 9, model().weights);
      CHECK(d.shape() == e.latent.shape());
    } catch (const std::exception&) {
      // A decoder error is an acceptable outcome.
    }
  }
}

TEST_CASE("quality index and lambda") {
  CHECK(lambda_for_quality(0) == doctest::Approx(16.0));
  CHECK(lambda_for_quality(15) == doctest::Approx(384.0));
  for (int q = 1; q < 16; ++q) CHECK(lambda_for_quality(q) > lambda_for_quality(q - 1));
  int vectors = 0;
  for (const auto& [name, w] : model().weights) vectors += name.rfind("vbp.enc.", 0) == 0;
  CHECK(vectors == 16);
  CHECK_THROWS_AS(lambda_for_quality(16), std::out_of_range);
}
