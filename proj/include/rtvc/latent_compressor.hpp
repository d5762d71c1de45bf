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

// The in-loop latent codec: space-to-depth, temporal contexts from the
// previous reconstructed latent, conditional analysis/synthesis, mean-removed
// quantisation and range coding. The encoder computes its reconstructed
// latent through exactly the decoder's arithmetic, so P-frame chains never
// drift.

#pragma once

#include <utility>

#include "rtvc/autodiff.hpp"
#include "rtvc/entropy.hpp"
#include "rtvc/model.hpp"

namespace rtvc {

// Residual symbols are limited to what the 16-bit escape can carry and what
// binary16 represents exactly.
inline constexpr float kResidualLimit = 16384.0f;

template <typename X>
struct TemporalContexts {
  X mix;      // conditions the frame reconstructor
  X entropy;  // conditions analysis, synthesis and the entropy model
};

template <typename X>
struct EntropyParameters {
  X mean;
  X scale;
};

inline TensorF to_latent(const TensorF& frame, int s) { return pixel_unshuffle(frame, s); }
inline TensorF from_latent(const TensorF& latent, int s) { return pixel_shuffle(latent, s); }

template <typename X>
TemporalContexts<X> extract_contexts(const X& previous_latent, const ParamMap<X>& p) {
  return {conv(silu(conv(previous_latent, p, "lc.ctx_m.0")), p, "lc.ctx_m.1"),
          conv(silu(conv(previous_latent, p, "lc.ctx_e.0")), p, "lc.ctx_e.1")};
}

// Zero contexts for intra frames, shaped (1, C_ctx, h, w).
inline TemporalContexts<TensorF> zero_contexts(const ModelConfig& cfg, int h, int w,
                                               PrecisionMode precision) {
  TensorF zero(Shape{1, cfg.context_channels, h, w}, precision);
  return {zero, zero};
}

// Mean and scale in the quality-modulated domain the residual is coded in,
// so the quantisation step relative to the prior is 1 / vbp.enc.
template <typename X>
EntropyParameters<X> entropy_parameters(const X& ctx_entropy, int q, const ParamMap<X>& p) {
  using S = typename X::value_type;
  const X h = conv(silu(conv(ctx_entropy, p, "lc.ent.0")), p, "lc.ent.1");
  const int c = value_of(h).shape().c / 2;
  const X& gain = param(p, "vbp.enc." + quality_suffix(q));
  return {mul_channel(slice_channels(h, 0, c), gain),
          clamp(mul_channel(softplus(slice_channels(h, c, c)), gain), static_cast<S>(kScaleMin),
                static_cast<S>(kScaleMax))};
}

// y = analysis(concat(L_t, C^e_t)) modulated by the quality's channel vector.
template <typename X>
X analysis(const X& raw_latent, const X& ctx_entropy, int q, const ParamMap<X>& p) {
  X h = silu(conv(concat_channels(raw_latent, ctx_entropy), p, "lc.ana.0"));
  h = silu(conv(h, p, "lc.ana.1"));
  return mul_channel(conv(h, p, "lc.ana.2"), param(p, "vbp.enc." + quality_suffix(q)));
}

// Reconstructed latent from the quantised residual: y_hat = residual + mean.
template <typename X>
X synthesis(const X& residual, const X& mean, const X& ctx_entropy, int q, const ParamMap<X>& p) {
  const X y_hat = mul_channel(add(residual, mean), param(p, "vbp.dec." + quality_suffix(q)));
  X h = silu(conv(concat_channels(y_hat, ctx_entropy), p, "lc.syn.0"));
  h = silu(conv(h, p, "lc.syn.1"));
  return conv(h, p, "lc.syn.2");
}

// Training-time coding path: straight-through rounding, differentiable rate.
template <typename X>
struct LatentCoding {
  X residual;  // rounded (y - mean)
  X scale;
  X latent;    // reconstructed latent
};

template <typename X>
LatentCoding<X> code_latent(const X& raw_latent, const TemporalContexts<X>& ctx, int q,
                            const ParamMap<X>& p) {
  const X y = analysis(raw_latent, ctx.entropy, q, p);
  const EntropyParameters<X> ep = entropy_parameters(ctx.entropy, q, p);
  const X residual = quantize_ste(sub(y, ep.mean));
  return {residual, ep.scale, synthesis(residual, ep.mean, ctx.entropy, q, p)};
}

struct LatentEncoding {
  Bitstream bits;
  TensorF latent;
  SymbolPlane symbols;
};

// Both run at the precision carried by the inputs (FP16Emu at inference).
LatentEncoding encode_latent(const TensorF& raw_latent, const TemporalContexts<TensorF>& ctx,
                             int q, const WeightMap& weights);
TensorF decode_latent(const Bitstream& bits, const TemporalContexts<TensorF>& ctx, int q,
                      const WeightMap& weights);

}  // namespace rtvc
