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

// The out-of-loop frame reconstructor: a small U-Net whose ResBlocks apply
// the temporal shift at the entry of their residual branch, followed by a
// pixel-shuffle decoder head. One deterministic forward pass per frame.
//
//   in    conv3x3 (C_lat + C_ctx -> base)
//   down  per level: blocks_per_level ResBlocks, 2x2 mean pool, 1x1 widen
//   mid   one ResBlock
//   up    per level: nearest 2x, 1x1 narrow, add skip, ResBlocks
//   out   conv3x3 (base -> C_lat), plus skip_gain * input latent
//   head  log2(s) stages of conv3x3 + pixel_shuffle(2) + silu, conv3x3 -> RGB

#pragma once

#include <span>
#include <string>
#include <vector>

#include "rtvc/autodiff.hpp"
#include "rtvc/model.hpp"
#include "rtvc/temporal_shift.hpp"

namespace rtvc {

struct ShiftLayer {
  int id;
  int channels;
  int level;  // spatial dims are the latent dims >> level
  std::string name;
};

// ResBlocks in forward order; the index is the shift layer id.
std::vector<ShiftLayer> shift_layers(const ModelConfig& cfg);

template <typename X>
void register_shift_layers(ShiftState<X>& state, const ModelConfig& cfg, int latent_h,
                           int latent_w, PrecisionMode precision = PrecisionMode::FP32) {
  for (const ShiftLayer& layer : shift_layers(cfg)) {
    state.register_layer(layer.id, layer.channels, latent_h >> layer.level,
                         latent_w >> layer.level, precision);
  }
}

namespace detail {

template <typename X, typename ShiftFn>
X resblock(const X& h, const ParamMap<X>& p, const std::string& name, int layer_id,
           bool shift_enabled, ShiftFn& shift) {
  X r = shift_enabled ? shift(h, layer_id) : h;
  r = conv(silu(r), p, name + ".conv1");
  r = conv(silu(r), p, name + ".conv2");
  return add(h, r);
}

}  // namespace detail

// One U-Net pass over concat(latent, ctx_mix). `shift(x, layer_id)` realises
// the temporal shift for whichever mode the caller runs.
template <typename X, typename ShiftFn>
X unet_forward(const X& latent, const X& ctx_mix, const ParamMap<X>& p, const ModelConfig& cfg,
               ShiftFn&& shift) {
  const auto layers = shift_layers(cfg);
  std::size_t next = 0;
  auto block = [&](const X& h) {
    const ShiftLayer& layer = layers.at(next++);
    return detail::resblock(h, p, layer.name, layer.id, cfg.temporal_shift, shift);
  };

  X h = conv(concat_channels(latent, ctx_mix), p, "fr.in");
  std::vector<X> skips;
  for (int l = 0; l < cfg.depth; ++l) {
    for (int b = 0; b < cfg.blocks_per_level; ++b) h = block(h);
    skips.push_back(h);
    h = conv(downsample2x(h), p, "fr.down" + std::to_string(l) + ".proj");
  }
  h = block(h);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    h = add(conv(upsample2x(h), p, "fr.up" + std::to_string(l) + ".proj"), skips[l]);
    for (int b = 0; b < cfg.blocks_per_level; ++b) h = block(h);
  }
  return add(mul_channel(latent, param(p, "fr.skip_gain")), conv(h, p, "fr.out"));
}

// Sequential enhancement of one frame; advances the per-layer shift state.
template <typename X>
X enhance(const X& latent, const X& ctx_mix, ShiftState<X>& state, const ParamMap<X>& p,
          const ModelConfig& cfg) {
  return unet_forward(latent, ctx_mix, p, cfg,
                      [&state](const X& x, int id) { return online_shift(x, state, id); });
}

// Batch enhancement of N consecutive frames stacked on the batch axis.
// Bit-identical to N sequential enhance calls; `restart` marks samples that
// begin a new sequence (intra frames).
inline TensorF enhance_batch(const TensorF& latents, const TensorF& ctx_mix, BatchCarry& carry,
                             std::span<const bool> restart, const WeightMap& weights,
                             const ModelConfig& cfg) {
  return unet_forward(latents, ctx_mix, weights, cfg, [&](const TensorF& x, int id) {
    return batch_shift(x, carry, id, restart);
  });
}

// Decoder head: latent (C_lat, h, w) -> frame (3, h*s, w*s) clamped to [0, 1].
template <typename X>
X reconstruct(const X& latent, const ParamMap<X>& p, const ModelConfig& cfg) {
  using S = typename X::value_type;
  X h = latent;
  for (int stage = 0; (1 << stage) < cfg.unshuffle; ++stage) {
    h = silu(pixel_shuffle(conv(h, p, "head.up" + std::to_string(stage)), 2));
  }
  return clamp(conv(h, p, "head.out"), S(0), S(1));
}

}  // namespace rtvc
