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

#include "rtvc/dataset.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "rtvc/random.hpp"

namespace rtvc {
namespace {

struct Wave {
  double fx, fy, phase;
  std::array<double, 3> amp;
};

struct Scene {
  std::array<double, 3> base;
  std::array<double, 3> grad_x;
  std::array<double, 3> grad_y;
  std::vector<Wave> background_waves;
  std::array<double, 3> patch_color;
  std::vector<Wave> patch_waves;
  double half_w, half_h;  // patch half extents
  double cx, cy, theta;   // pose at frame 0
  double vx, vy, omega;
};

constexpr double kEdge = 1.5;  // soft edge width in pixels

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<Wave> make_waves(Rng& rng, int count, double max_freq, double amp) {
  std::vector<Wave> waves;
  for (int i = 0; i < count; ++i) {
    Wave w{rng.uniform(-max_freq, max_freq), rng.uniform(-max_freq, max_freq),
           rng.uniform(0.0, 2 * std::numbers::pi), {}};
    for (double& a : w.amp) a = rng.uniform(-amp, amp);
    waves.push_back(w);
  }
  return waves;
}

Scene make_scene(Rng& rng, const DatasetConfig& cfg) {
  Scene s;
  for (int c = 0; c < 3; ++c) {
    s.base[c] = rng.uniform(0.25, 0.75);
    s.grad_x[c] = rng.uniform(-0.25, 0.25) / cfg.width;
    s.grad_y[c] = rng.uniform(-0.25, 0.25) / cfg.height;
    s.patch_color[c] = rng.uniform(0.2, 0.8);
  }
  s.background_waves = make_waves(rng, 2, 0.15, 0.06);
  s.patch_waves = make_waves(rng, 3, 0.35, 0.1);
  s.half_w = rng.uniform(0.15, 0.3) * cfg.width;
  s.half_h = rng.uniform(0.15, 0.3) * cfg.height;
  s.cx = rng.uniform(0.35, 0.65) * cfg.width;
  s.cy = rng.uniform(0.35, 0.65) * cfg.height;
  s.theta = rng.uniform(-0.3, 0.3);
  s.vx = rng.uniform(-2.5, 2.5);
  s.vy = rng.uniform(-2.5, 2.5);
  s.omega = cfg.allow_rotation && rng.uniform() < 0.5 ? rng.uniform(-0.04, 0.04) : 0.0;
  return s;
}

struct Pose {
  double cx, cy, cos_t, sin_t;

  // Frame coordinates -> patch-local coordinates.
  void to_local(double x, double y, double& u, double& v) const {
    const double dx = x - cx, dy = y - cy;
    u = cos_t * dx + sin_t * dy;
    v = -sin_t * dx + cos_t * dy;
  }
  void to_frame(double u, double v, double& x, double& y) const {
    x = cx + cos_t * u - sin_t * v;
    y = cy + sin_t * u + cos_t * v;
  }
};

Pose pose_at(const Scene& s, int t) {
  const double th = s.theta + s.omega * t;
  return {s.cx + s.vx * t, s.cy + s.vy * t, std::cos(th), std::sin(th)};
}

double coverage(const Scene& s, double u, double v) {
  // Distance inside the rectangle, ramped over the soft edge.
  const double inside = std::min(s.half_w - std::abs(u), s.half_h - std::abs(v));
  return clamp01(inside / kEdge + 0.5);
}

double wave_sum(const std::vector<Wave>& waves, int c, double x, double y) {
  double v = 0.0;
  for (const Wave& w : waves) v += w.amp[c] * std::sin(w.fx * x + w.fy * y + w.phase);
  return v;
}

}  // namespace

std::vector<Sequence> synthetic_dataset(std::uint32_t seed, int count, const DatasetConfig& cfg) {
  detail::require(cfg.height > 0 && cfg.width > 0 && cfg.frames >= 1 && count >= 0,
                  "synthetic_dataset: bad dimensions");
  Rng rng(seed);
  std::vector<Sequence> out;
  for (int i = 0; i < count; ++i) {
    const Scene scene = make_scene(rng, cfg);
    Sequence seq;
    seq.velocity_x = scene.vx;
    seq.velocity_y = scene.vy;
    seq.angular_velocity = scene.omega;
    std::vector<std::vector<double>> alpha(cfg.frames);
    for (int t = 0; t < cfg.frames; ++t) {
      const Pose pose = pose_at(scene, t);
      TensorF frame(Shape{1, 3, cfg.height, cfg.width});
      alpha[t].resize(static_cast<std::size_t>(cfg.height) * cfg.width);
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) {
          double u, v;
          pose.to_local(x, y, u, v);
          const double a = coverage(scene, u, v);
          alpha[t][static_cast<std::size_t>(y) * cfg.width + x] = a;
          for (int c = 0; c < 3; ++c) {
            const double bg = scene.base[c] + scene.grad_x[c] * x + scene.grad_y[c] * y +
                              wave_sum(scene.background_waves, c, x, y);
            const double fg = scene.patch_color[c] + wave_sum(scene.patch_waves, c, u, v);
            frame(0, c, y, x) = static_cast<float>(clamp01(a * fg + (1 - a) * bg));
          }
        }
      }
      seq.frames.push_back(std::move(frame));

      TensorF flow(Shape{1, 2, cfg.height, cfg.width});
      TensorF mask(Shape{1, 1, cfg.height, cfg.width});
      if (t > 0) {
        const Pose prev = pose_at(scene, t - 1);
        for (int y = 0; y < cfg.height; ++y) {
          for (int x = 0; x < cfg.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * cfg.width + x;
            const double a = alpha[t][idx];
            bool valid = false;
            if (a >= 1.0) {
              double u, v, sx, sy;
              pose.to_local(x, y, u, v);
              prev.to_frame(u, v, sx, sy);
              flow(0, 0, y, x) = static_cast<float>(sx - x);
              flow(0, 1, y, x) = static_cast<float>(sy - y);
              valid = sx >= 0 && sy >= 0 && sx <= cfg.width - 1 && sy <= cfg.height - 1;
            } else if (a <= 0.0) {
              valid = alpha[t - 1][idx] <= 0.0;
            }
            mask(0, 0, y, x) = valid ? 1.0f : 0.0f;
          }
        }
      }
      seq.flows.push_back(std::move(flow));
      seq.masks.push_back(std::move(mask));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Sequence crop_sequence(const Sequence& seq, int first, int frames, int top, int left, int h, int w) {
  detail::require(first >= 0 && frames >= 1 && first + frames <= static_cast<int>(seq.frames.size()),
                  "crop_sequence: frame window out of range");
  const Shape& s = seq.frames.front().shape();
  detail::require(top >= 0 && left >= 0 && h >= 1 && w >= 1 && top + h <= s.h && left + w <= s.w,
                  "crop_sequence: crop window out of range");
  auto crop = [&](const TensorF& t) {
    TensorF out(Shape{t.shape().n, t.shape().c, h, w}, t.precision());
    for (int c = 0; c < t.shape().c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(0, c, y, x) = t(0, c, y + top, x + left);
    return out;
  };
  Sequence out;
  out.velocity_x = seq.velocity_x;
  out.velocity_y = seq.velocity_y;
  out.angular_velocity = seq.angular_velocity;
  for (int t = first; t < first + frames; ++t) {
    out.frames.push_back(crop(seq.frames[t]));
    TensorF flow = crop(seq.flows[t]);
    TensorF mask = crop(seq.masks[t]);
    if (t == first) {
      flow.array().setZero();
      mask.array().setZero();
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double sx = x + flow(0, 0, y, x), sy = y + flow(0, 1, y, x);
        if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) mask(0, 0, y, x) = 0.0f;
      }
    out.flows.push_back(std::move(flow));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

}  // namespace rtvc
