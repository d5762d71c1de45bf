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

#include "rtvc/consistency.hpp"

#include <cmath>
#include <limits>

#include "rtvc/random.hpp"

namespace rtvc {
namespace {

void check_flow_shape(const TensorF& flow, const char* what) {
  const Shape& s = flow.shape();
  detail::require(s.n == 1 && s.c == 2, std::string(what) + ": flow must be (1,2,H,W), got " + s.str());
}

}  // namespace

TensorF block_matching_flow(const TensorF& current, const TensorF& previous, int block,
                            int radius) {
  const Shape& s = current.shape();
  detail::require(s == previous.shape(), "block_matching_flow: frame shapes differ");
  detail::require(s.n == 1, "block_matching_flow: expects single frames");
  detail::require(block >= 1 && radius >= 0, "block_matching_flow: bad block/radius");
  TensorF flow(Shape{1, 2, s.h, s.w});

  auto at = [&](int c, int y, int x) {
    return static_cast<double>(previous(0, c, std::clamp(y, 0, s.h - 1), std::clamp(x, 0, s.w - 1)));
  };

  for (int by = 0; by < s.h; by += block) {
    for (int bx = 0; bx < s.w; bx += block) {
      const int ey = std::min(by + block, s.h);
      const int ex = std::min(bx + block, s.w);
      double best = std::numeric_limits<double>::infinity();
      int best_dx = 0, best_dy = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          double sad = 0.0;
          for (int c = 0; c < s.c; ++c)
            for (int y = by; y < ey; ++y)
              for (int x = bx; x < ex; ++x) sad += std::abs(current(0, c, y, x) - at(c, y + dy, x + dx));
          const auto key = [](int ddx, int ddy) {
            return std::tuple(std::abs(ddx) + std::abs(ddy), ddy, ddx);
          };
          if (sad < best || (sad == best && key(dx, dy) < key(best_dx, best_dy))) {
            best = sad;
            best_dx = dx;
            best_dy = dy;
          }
        }
      }
      for (int y = by; y < ey; ++y)
        for (int x = bx; x < ex; ++x) {
          flow(0, 0, y, x) = static_cast<float>(best_dx);
          flow(0, 1, y, x) = static_cast<float>(best_dy);
        }
    }
  }
  return flow;
}

TensorF occlusion_mask(const TensorF& forward, const TensorF& backward, float tau) {
  check_flow_shape(forward, "occlusion_mask");
  detail::require(forward.shape() == backward.shape(), "occlusion_mask: flow shapes differ");
  const TensorF back_warped = bilinear_sample(backward, forward);
  const Shape& s = forward.shape();
  TensorF mask(Shape{1, 1, s.h, s.w});
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const double ex = double(forward(0, 0, y, x)) + back_warped(0, 0, y, x);
      const double ey = double(forward(0, 1, y, x)) + back_warped(0, 1, y, x);
      mask(0, 0, y, x) = std::hypot(ex, ey) <= tau ? 1.0f : 0.0f;
    }
  return mask;
}

std::vector<std::uint8_t> serialize_flow(const TensorF& flow) {
  check_flow_shape(flow, "serialize_flow");
  ByteWriter w;
  w.text("NVCF");
  w.u32(static_cast<std::uint32_t>(flow.shape().h));
  w.u32(static_cast<std::uint32_t>(flow.shape().w));
  for (Eigen::Index i = 0; i < flow.size(); ++i) w.f32(flow.data()[i]);
  return std::move(w.data());
}

TensorF parse_flow(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "flow");
  r.expect_magic("NVCF");
  const auto h = static_cast<int>(r.u32());
  const auto w = static_cast<int>(r.u32());
  if (h <= 0 || w <= 0) throw DataError("flow: empty dimensions");
  if (r.remaining() != 8ull * h * w) throw DataError("flow: payload size does not match dims");
  TensorF flow(Shape{1, 2, h, w});
  for (Eigen::Index i = 0; i < flow.size(); ++i) {
    flow.data()[i] = r.f32();
    if (!std::isfinite(flow.data()[i])) throw DataError("flow: non-finite displacement");
  }
  return flow;
}

void save_flow(const std::filesystem::path& path, const TensorF& flow) {
  write_file(path, serialize_flow(flow));
}

TensorF load_flow(const std::filesystem::path& path) { return parse_flow(read_file(path)); }

template <typename Scalar>
PerceptualProxy<Scalar>::PerceptualProxy() {
  Rng rng(kSeed);
  const int widths[][2] = {{8, 3}, {16, 8}, {16, 16}, {16, 16}};
  for (const auto& [out_c, in_c] : widths) {
    Tensor<Scalar> w(Shape{out_c, in_c, 3, 3});
    const double bound = std::sqrt(6.0 / (in_c * 9));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    Tensor<Scalar> b(Shape{1, out_c, 1, 1});
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = static_cast<Scalar>(rng.uniform(-0.05, 0.05));
    weights_.push_back(std::move(w));
    weights_.push_back(std::move(b));
  }
}

template class PerceptualProxy<float>;
template class PerceptualProxy<double>;

}  // namespace rtvc
