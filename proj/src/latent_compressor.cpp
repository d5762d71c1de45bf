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

#include "rtvc/latent_compressor.hpp"

namespace rtvc {
namespace {

GaussianParams coding_params(const EntropyParameters<TensorF>& ep) {
  // Symbols are mean-removed, so the coder sees a zero-mean Gaussian.
  TensorF zero(ep.scale.shape());
  return GaussianParams::clamped(std::move(zero), ep.scale);
}

TensorF residual_from_symbols(const SymbolPlane& symbols, PrecisionMode precision) {
  TensorF r(symbols.shape, precision);
  for (std::size_t i = 0; i < symbols.symbols.size(); ++i) {
    r.data()[i] = static_cast<float>(symbols.symbols[i]);
  }
  r.round();
  return r;
}

}  // namespace

LatentEncoding encode_latent(const TensorF& raw_latent, const TemporalContexts<TensorF>& ctx,
                             int q, const WeightMap& weights) {
  check_quality(q);
  const TensorF y = analysis(raw_latent, ctx.entropy, q, weights);
  const EntropyParameters<TensorF> ep = entropy_parameters(ctx.entropy, q, weights);
  const TensorF rounded = clamp(round_nearest(sub(y, ep.mean)), -kResidualLimit, kResidualLimit);

  LatentEncoding out;
  out.symbols = SymbolPlane::from_tensor(rounded);
  out.bits = encode(out.symbols, coding_params(ep));
  // Rebuild the residual from the symbols, exactly as the decoder will.
  const TensorF residual = residual_from_symbols(out.symbols, ep.mean.precision());
  out.latent = synthesis(residual, ep.mean, ctx.entropy, q, weights);
  return out;
}

TensorF decode_latent(const Bitstream& bits, const TemporalContexts<TensorF>& ctx, int q,
                      const WeightMap& weights) {
  check_quality(q);
  const EntropyParameters<TensorF> ep = entropy_parameters(ctx.entropy, q, weights);
  const SymbolPlane symbols = decode(bits, coding_params(ep));
  const TensorF residual = residual_from_symbols(symbols, ep.mean.precision());
  return synthesis(residual, ep.mean, ctx.entropy, q, weights);
}

}  // namespace rtvc
