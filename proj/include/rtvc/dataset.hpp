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

// Deterministic synthetic video: a textured patch with soft edges moving at
// constant velocity (optionally rotating) over a smooth gradient background.
// Every consecutive pair comes with its exact t -> t-1 flow and a validity
// mask excluding disocclusions, blended edges and out-of-frame sources.

#pragma once

#include <cstdint>
#include <vector>

#include "rtvc/tensor.hpp"

namespace rtvc {

struct Sequence {
  std::vector<TensorF> frames;  // (1, 3, H, W) in [0, 1]
  std::vector<TensorF> flows;   // flows[t] maps frame t to t-1; flows[0] is zero
  std::vector<TensorF> masks;   // masks[t] valid pixels of flows[t]; masks[0] is zero
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  double angular_velocity = 0.0;
};

struct DatasetConfig {
  int height = 64;
  int width = 64;
  int frames = 4;
  bool allow_rotation = true;
};

std::vector<Sequence> synthetic_dataset(std::uint32_t seed, int count, const DatasetConfig& cfg);

// A window of `frames` frames starting at `first`, cropped to h x w at
// (top, left). Mask entries whose flow source leaves the crop are cleared.
Sequence crop_sequence(const Sequence& seq, int first, int frames, int top, int left, int h, int w);

}  // namespace rtvc
