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

#include "rtvc/weights.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "rtvc/errors.hpp"

namespace rtvc {

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::uint64_t ByteReader::get(int n) {
  if (remaining() < static_cast<std::size_t>(n)) throw TruncatedStream(what_ + ": unexpected end of data");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
  pos_ += n;
  return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  if (remaining() < n) throw TruncatedStream(what_ + ": unexpected end of data");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::text(std::size_t n) {
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

void ByteReader::expect_magic(const char (&magic)[5]) {
  if (text(4) != std::string(magic, 4)) throw DataError(what_ + ": bad magic, expected " + magic);
}

std::vector<std::uint8_t> serialize_weights(const WeightMap& weights) {
  ByteWriter w;
  w.text("NVCW");
  w.u16(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, t] : weights) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(0);
    w.u8(4);
    const Shape& s = t.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  }
  return std::move(w.data());
}

WeightMap parse_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "weights");
  r.expect_magic("NVCW");
  const std::uint16_t version = r.u16();
  if (version != kWeightsVersion) throw DataError("weights: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  WeightMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.text(r.u16());
    if (r.u8() != 0) throw DataError("weights: tensor " + name + " has unsupported dtype");
    const int rank = r.u8();
    if (rank < 1 || rank > 4) throw DataError("weights: tensor " + name + " has rank " + std::to_string(rank));
    int dims[4] = {1, 1, 1, 1};
    for (int d = 4 - rank; d < 4; ++d) dims[d] = static_cast<int>(r.u32());
    TensorF t(Shape{dims[0], dims[1], dims[2], dims[3]});
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = r.f32();
    if (!out.emplace(name, std::move(t)).second) throw DataError("weights: duplicate tensor " + name);
  }
  if (r.remaining() != 0) throw DataError("weights: trailing bytes");
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void save_weights(const std::filesystem::path& path, const WeightMap& weights) {
  write_file(path, serialize_weights(weights));
}

WeightMap load_weights(const std::filesystem::path& path) { return parse_weights(read_file(path)); }

const TensorF& require_weight(const WeightMap& weights, const std::string& name) {
  auto it = weights.find(name);
  if (it == weights.end()) throw DataError("weights: missing tensor " + name);
  return it->second;
}

}  // namespace rtvc
