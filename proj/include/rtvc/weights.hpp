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

// Named parameter tensors and the "NVCW" weights file.
//
// Layout (little-endian): magic "NVCW", u16 version, u32 tensor count; per
// tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 rank,
// u32 dims[rank], raw f32 payload. Tensors are written in name order with
// rank 4; ranks 1-3 are accepted on read and padded with leading ones.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rtvc/tensor.hpp"

namespace rtvc {

using WeightMap = std::map<std::string, TensorF>;

inline constexpr std::uint16_t kWeightsVersion = 1;

std::vector<std::uint8_t> serialize_weights(const WeightMap& weights);
WeightMap parse_weights(std::span<const std::uint8_t> bytes);

void save_weights(const std::filesystem::path& path, const WeightMap& weights);
WeightMap load_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

const TensorF& require_weight(const WeightMap& weights, const std::string& name);

// Little-endian byte helpers shared by the binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v);
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void text(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> in, std::string what) : in_(in), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  float f32();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string text(std::size_t n);
  void expect_magic(const char (&magic)[5]);
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get(int n);
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace rtvc
