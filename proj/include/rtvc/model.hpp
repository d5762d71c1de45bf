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

// Model configuration, parameter naming and initialisation shared by the
// latent compressor and the frame reconstructor.
//
// Parameter name prefixes:
//   lc.*    latent compressor (contexts, analysis, synthesis, entropy net)
//   vbp.*   per-quality channel modulation vectors
//   fr.*    frame reconstructor U-Net
//   head.*  pixel-shuffle decoder head

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rtvc/autodiff.hpp"
#include "rtvc/errors.hpp"
#include "rtvc/tensor.hpp"
#include "rtvc/weights.hpp"

namespace rtvc {

inline constexpr int kQualityLevels = 16;
inline constexpr double kLambdaMin = 16.0;
inline constexpr double kLambdaMax = 384.0;

// Geometric spacing between kLambdaMin (q = 0) and kLambdaMax (q = 15).
double lambda_for_quality(int q);
void check_quality(int q);

struct ModelConfig {
  int unshuffle = 8;          // space-to-depth factor s
  int latent_channels = 32;   // channel-expanded latent width
  int context_channels = 16;  // width of each temporal context
  int hidden_channels = 64;   // compressor hidden width
  int base_channels = 32;     // U-Net width at full latent resolution
  int depth = 2;              // U-Net down/up levels
  int blocks_per_level = 2;   // ResBlocks per level on each path
  int head_channels = 32;     // first decoder-head stage width
  bool temporal_shift = true; // shift in every ResBlock residual branch

  int raw_latent_channels() const { return 3 * unshuffle * unshuffle; }
  int level_channels(int level) const { return base_channels << level; }
  // Frame dims must be multiples of this.
  int frame_multiple() const { return unshuffle << depth; }
  int resblock_count() const { return 2 * depth * blocks_per_level + 1; }

  static ModelConfig desk() { return {}; }
  static ModelConfig paper_scale() {
    ModelConfig c;
    c.latent_channels = 256;
    c.context_channels = 64;
    c.hidden_channels = 256;
    c.base_channels = 128;
    c.head_channels = 128;
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

// Checks frame dims against the config and the shift ratio P.
void validate_geometry(const ModelConfig& cfg, int height, int width, int shift_p);

struct Model {
  ModelConfig config;
  WeightMap weights;
};

// Fresh weights from a fixed seed. The config is stored alongside as the
// "config" tensor so a weights file is self-describing.
Model init_model(const ModelConfig& cfg, std::uint32_t seed);

Model model_from_weights(WeightMap weights);
WeightMap weights_with_config(const Model& model);

std::string quality_suffix(int q);

// Generic parameter lookup for model code written over Tensor or Var.
template <typename X>
using ParamMap = std::map<std::string, X>;

template <typename X>
const X& param(const ParamMap<X>& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw DataError("model: missing parameter " + name);
  return it->second;
}

// Same-padded convolution using `name`.w and `name`.b.
template <typename X>
X conv(const X& x, const ParamMap<X>& p, const std::string& name) {
  const X& w = param(p, name + ".w");
  const int k = value_of(w).shape().h;
  return conv2d(x, w, param(p, name + ".b"), 1, k / 2);
}

}  // namespace rtvc
