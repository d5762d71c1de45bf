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

#include "rtvc/frame_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "rtvc/weights.hpp"

namespace rtvc {

std::uint8_t to_byte(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  if (!(scaled > 0.0)) return 0;  // also maps NaN to 0
  return scaled >= 255.0 ? 255 : static_cast<std::uint8_t>(scaled);
}

FrameSequence FrameSequence::from_tensors(std::span<const TensorF> frames) {
  FrameSequence seq;
  if (frames.empty()) return seq;
  const Shape& s = frames.front().shape();
  detail::require(s.n == 1 && s.c == 3, "frames must be (1,3,H,W), got " + s.str());
  seq.width = s.w;
  seq.height = s.h;
  for (const TensorF& f : frames) {
    detail::require(f.shape() == s, "frame dims differ within a sequence");
    std::vector<std::uint8_t> rgb(seq.frame_bytes());
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        for (int c = 0; c < 3; ++c)
          rgb[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] = to_byte(f(0, c, y, x));
    seq.frames.push_back(std::move(rgb));
  }
  return seq;
}

std::vector<TensorF> FrameSequence::to_tensors() const {
  std::vector<TensorF> out;
  for (const auto& rgb : frames) {
    TensorF f(Shape{1, 3, height, width});
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < 3; ++c)
          f(0, c, y, x) = from_byte(rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(int width, int height, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ShapeError("ppm: pixel buffer does not match dims");
  }
  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

std::vector<std::uint8_t> decode_ppm(std::span<const std::uint8_t> bytes, int& width, int& height) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw DataError("ppm: malformed header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw DataError("ppm: not a binary P6 file");
  pos = 2;
  const long w = number();
  const long h = number();
  const long maxval = number();
  if (w <= 0 || h <= 0) throw DataError("ppm: empty dimensions");
  if (maxval != 255) throw DataError("ppm: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DataError("ppm: malformed header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos != need) throw DataError("ppm: pixel data size does not match dims");
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  return {bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()};
}

std::vector<std::uint8_t> serialize_nvcr(const FrameSequence& seq) {
  ByteWriter w;
  w.text("NVCR");
  w.u32(static_cast<std::uint32_t>(seq.width));
  w.u32(static_cast<std::uint32_t>(seq.height));
  w.u32(static_cast<std::uint32_t>(seq.count()));
  for (const auto& f : seq.frames) {
    if (f.size() != seq.frame_bytes()) throw ShapeError("nvcr: frame size does not match dims");
    w.bytes(f);
  }
  return std::move(w.data());
}

FrameSequence parse_nvcr(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "nvcr");
  r.expect_magic("NVCR");
  FrameSequence seq;
  seq.width = static_cast<int>(r.u32());
  seq.height = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  if (seq.width <= 0 || seq.height <= 0 || count == 0) throw DataError("nvcr: empty dimensions");
  if (r.remaining() != seq.frame_bytes() * count) throw DataError("nvcr: payload size does not match dims");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto b = r.bytes(seq.frame_bytes());
    seq.frames.emplace_back(b.begin(), b.end());
  }
  return seq;
}

std::filesystem::path ppm_frame_path(const std::filesystem::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06zu.ppm", index);
  return dir / name;
}

namespace {

bool is_nvcr(const std::filesystem::path& path) { return path.extension() == ".nvcr"; }

}  // namespace

FrameSequence read_frames(const std::filesystem::path& path) {
  if (is_nvcr(path)) return parse_nvcr(read_file(path));
  if (!std::filesystem::is_directory(path)) throw DataError("frames: " + path.string() + " is not a directory");
  FrameSequence seq;
  for (std::size_t i = 0;; ++i) {
    const auto file = ppm_frame_path(path, i);
    if (!std::filesystem::exists(file)) break;
    int w = 0, h = 0;
    std::vector<std::uint8_t> rgb = decode_ppm(read_file(file), w, h);
    if (i == 0) {
      seq.width = w;
      seq.height = h;
    } else if (w != seq.width || h != seq.height) {
      throw DataError("frames: " + file.string() + " has inconsistent dims");
    }
    seq.frames.push_back(std::move(rgb));
  }
  if (seq.frames.empty()) throw DataError("frames: no frame_000000.ppm in " + path.string());
  return seq;
}

void write_frames(const std::filesystem::path& path, const FrameSequence& seq) {
  if (is_nvcr(path)) {
    write_file(path, serialize_nvcr(seq));
    return;
  }
  std::filesystem::create_directories(path);
  for (std::size_t i = 0; i < seq.count(); ++i) {
    write_file(ppm_frame_path(path, i), encode_ppm(seq.width, seq.height, seq.frames[i]));
  }
}

}  // namespace rtvc
