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

#include "rtvc/model.hpp"

#include <cmath>
#include <cstdio>

#include "rtvc/frame_reconstructor.hpp"
#include "rtvc/random.hpp"

namespace rtvc {
namespace {

constexpr int kConfigVersion = 1;

class Initializer {
 public:
  Initializer(WeightMap& w, std::uint32_t seed) : w_(w), rng_(seed) {}

  void conv(const std::string& name, int out_c, int in_c, int k, double gain = 1.0,
            float bias = 0.0f) {
    TensorF weight(Shape{out_c, in_c, k, k});
    const double bound = gain * std::sqrt(3.0 / (in_c * k * k));
    for (Eigen::Index i = 0; i < weight.size(); ++i) {
      weight.data()[i] = static_cast<float>(rng_.uniform(-bound, bound));
    }
    w_[name + ".w"] = std::move(weight);
    w_[name + ".b"] = TensorF::constant(Shape{1, out_c, 1, 1}, bias);
  }

  void vector(const std::string& name, int c, float value) {
    w_[name] = TensorF::constant(Shape{1, c, 1, 1}, value);
  }

  WeightMap& weights() { return w_; }

 private:
  WeightMap& w_;
  Rng rng_;
};

}  // namespace

double lambda_for_quality(int q) {
  check_quality(q);
  return kLambdaMin * std::pow(kLambdaMax / kLambdaMin, q / double(kQualityLevels - 1));
}

void check_quality(int q) {
  if (q < 0 || q >= kQualityLevels) {
    throw std::out_of_range("quality index " + std::to_string(q) + " outside [0, 15]");
  }
}

std::string quality_suffix(int q) {
  check_quality(q);
  char buf[4];
  std::snprintf(buf, sizeof buf, "%02d", q);
  return buf;
}

void validate_geometry(const ModelConfig& cfg, int height, int width, int shift_p) {
  const int m = cfg.frame_multiple();
  if (height <= 0 || width <= 0 || height % m != 0 || width % m != 0) {
    throw ShapeError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                     " must be a positive multiple of " + std::to_string(m));
  }
  if (shift_p < 1) throw ShapeError("shift P must be >= 1");
  for (int l = 0; l <= cfg.depth; ++l) {
    if (cfg.level_channels(l) % shift_p != 0) {
      throw ShapeError("U-Net width " + std::to_string(cfg.level_channels(l)) +
                       " not divisible by P=" + std::to_string(shift_p));
    }
  }
}

std::vector<ShiftLayer> shift_layers(const ModelConfig& cfg) {
  std::vector<ShiftLayer> out;
  auto push = [&](int level, const std::string& name) {
    out.push_back({static_cast<int>(out.size()), cfg.level_channels(level), level, name});
  };
  for (int l = 0; l < cfg.depth; ++l)
    for (int b = 0; b < cfg.blocks_per_level; ++b)
      push(l, "fr.down" + std::to_string(l) + ".rb" + std::to_string(b));
  push(cfg.depth, "fr.mid.rb0");
  for (int l = cfg.depth - 1; l >= 0; --l)
    for (int b = 0; b < cfg.blocks_per_level; ++b)
      push(l, "fr.up" + std::to_string(l) + ".rb" + std::to_string(b));
  return out;
}

Model init_model(const ModelConfig& cfg, std::uint32_t seed) {
  if ((cfg.unshuffle & (cfg.unshuffle - 1)) != 0 || cfg.unshuffle < 2) {
    throw ShapeError("unshuffle factor must be a power of two >= 2");
  }
  Model model{cfg, {}};
  Initializer init(model.weights, seed);
  const int lat = cfg.latent_channels;
  const int ctx = cfg.context_channels;
  const int hid = cfg.hidden_channels;

  // Latent compressor.
  init.conv("lc.ctx_m.0", hid, lat, 3);
  init.conv("lc.ctx_m.1", ctx, hid, 3);
  init.conv("lc.ctx_e.0", hid, lat, 3);
  init.conv("lc.ctx_e.1", ctx, hid, 3);
  init.conv("lc.ana.0", hid, cfg.raw_latent_channels() + ctx, 3);
  init.conv("lc.ana.1", hid, hid, 3);
  init.conv("lc.ana.2", lat, hid, 3);
  init.conv("lc.syn.0", hid, lat + ctx, 3);
  init.conv("lc.syn.1", hid, hid, 3);
  init.conv("lc.syn.2", lat, hid, 3);
  init.conv("lc.ent.0", hid, ctx, 3);
  init.conv("lc.ent.1", 2 * lat, hid, 3, 0.1);
  {
    // softplus(0.5413) == 1: unit scales before training.
    TensorF& b = model.weights["lc.ent.1.b"];
    for (int c = lat; c < 2 * lat; ++c) b.data()[c] = 0.5413f;
  }
  for (int q = 0; q < kQualityLevels; ++q) {
    const float gain = static_cast<float>(std::pow(16.0, q / double(kQualityLevels - 1)));
    init.vector("vbp.enc." + quality_suffix(q), lat, gain);
    init.vector("vbp.dec." + quality_suffix(q), lat, 1.0f / gain);
  }

  // Frame reconstructor.
  init.conv("fr.in", cfg.base_channels, lat + ctx, 3);
  for (const ShiftLayer& layer : shift_layers(cfg)) {
    init.conv(layer.name + ".conv1", layer.channels, layer.channels, 3);
    init.conv(layer.name + ".conv2", layer.channels, layer.channels, 3, 0.1);
  }
  for (int l = 0; l < cfg.depth; ++l) {
    init.conv("fr.down" + std::to_string(l) + ".proj", cfg.level_channels(l + 1),
              cfg.level_channels(l), 1);
    init.conv("fr.up" + std::to_string(l) + ".proj", cfg.level_channels(l),
              cfg.level_channels(l + 1), 1);
  }
  init.conv("fr.out", lat, cfg.base_channels, 3, 0.1);
  init.vector("fr.skip_gain", lat, 1.0f);

  // Decoder head.
  int in_c = lat;
  int stage = 0;
  for (; (1 << stage) < cfg.unshuffle; ++stage) {
    const int out_c = std::max(1, cfg.head_channels >> stage);
    init.conv("head.up" + std::to_string(stage), 4 * out_c, in_c, 3);
    in_c = out_c;
  }
  init.conv("head.out", 3, in_c, 3, 1.0, 0.5f);
  return model;
}

WeightMap weights_with_config(const Model& model) {
  WeightMap out = model.weights;
  const ModelConfig& c = model.config;
  const float values[] = {float(kConfigVersion),    float(c.unshuffle),       float(c.latent_channels),
                          float(c.context_channels), float(c.hidden_channels), float(c.base_channels),
                          float(c.depth),            float(c.blocks_per_level), float(c.head_channels),
                          float(c.temporal_shift ? 1 : 0)};
  TensorF cfg(Shape{1, 1, 1, static_cast<int>(std::size(values))});
  for (std::size_t i = 0; i < std::size(values); ++i) cfg.data()[i] = values[i];
  out["config"] = cfg;
  return out;
}

Model model_from_weights(WeightMap weights) {
  auto it = weights.find("config");
  if (it == weights.end()) throw DataError("weights: missing config tensor");
  const TensorF cfg = it->second;
  weights.erase(it);
  if (cfg.size() < 10 || cfg.data()[0] != kConfigVersion) throw DataError("weights: bad config tensor");
  auto at = [&](int i) { return static_cast<int>(cfg.data()[i]); };
  Model m;
  m.config.unshuffle = at(1);
  m.config.latent_channels = at(2);
  m.config.context_channels = at(3);
  m.config.hidden_channels = at(4);
  m.config.base_channels = at(5);
  m.config.depth = at(6);
  m.config.blocks_per_level = at(7);
  m.config.head_channels = at(8);
  m.config.temporal_shift = at(9) != 0;
  m.weights = std::move(weights);
  return m;
}

}  // namespace rtvc
