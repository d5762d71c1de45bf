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

// 8-bit RGB frame sequences on disk: directories of binary PPM files named
// frame_%06d.ppm, or a single "NVCR" raw file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rtvc/tensor.hpp"

namespace rtvc {

struct FrameSequence {
  int width = 0;
  int height = 0;
  std::vector<std::vector<std::uint8_t>> frames;  // interleaved RGB, row-major

  std::size_t count() const { return frames.size(); }
  std::size_t frame_bytes() const { return static_cast<std::size_t>(width) * height * 3; }

  static FrameSequence from_tensors(std::span<const TensorF> frames);
  std::vector<TensorF> to_tensors() const;

  bool operator==(const FrameSequence&) const = default;
};

// [0, 1] -> byte by round-half-up, clamped.
std::uint8_t to_byte(float v);
inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

std::vector<std::uint8_t> encode_ppm(int width, int height, std::span<const std::uint8_t> rgb);
// Returns the RGB bytes; width and height through the out parameters.
std::vector<std::uint8_t> decode_ppm(std::span<const std::uint8_t> bytes, int& width, int& height);

std::vector<std::uint8_t> serialize_nvcr(const FrameSequence& seq);
FrameSequence parse_nvcr(std::span<const std::uint8_t> bytes);

// A path ending in ".nvcr" is a raw file; anything else is a PPM directory.
FrameSequence read_frames(const std::filesystem::path& path);
void write_frames(const std::filesystem::path& path, const FrameSequence& seq);

std::filesystem::path ppm_frame_path(const std::filesystem::path& dir, std::size_t index);

}  // namespace rtvc
