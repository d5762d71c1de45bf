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

// Rank-4 (batch, channel, height, width) tensors and the deterministic kernels
// every network in the codec is built from.
//
// Kernels process batch samples independently with a fixed per-sample
// operation order, so packing frames into a batch never changes a single
// output bit. Outputs are re-rounded to the input's precision tag.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rtvc/errors.hpp"
#include "rtvc/precision.hpp"

namespace rtvc {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  Eigen::Index count() const {
    return static_cast<Eigen::Index>(n) * c * h * w;
  }
  Eigen::Index plane() const { return static_cast<Eigen::Index>(h) * w; }
  Eigen::Index sample() const { return static_cast<Eigen::Index>(c) * h * w; }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using value_type = Scalar;

  Tensor() = default;

  explicit Tensor(Shape shape, PrecisionMode precision = PrecisionMode::FP32)
      : shape_(shape), data_(Storage::Zero(shape.count())), precision_(precision) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw ShapeError("Tensor: negative dimension in " + shape.str());
    }
  }

  Tensor(Shape shape, Storage data, PrecisionMode precision = PrecisionMode::FP32)
      : shape_(shape), data_(std::move(data)), precision_(precision) {
    if (data_.size() != shape_.count()) {
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  static Tensor constant(Shape shape, Scalar value,
                         PrecisionMode precision = PrecisionMode::FP32) {
    Tensor t(shape, precision);
    t.data_.setConstant(value);
    t.round();
    return t;
  }

  static Tensor scalar(Scalar value) {
    return constant(Shape{1, 1, 1, 1}, value);
  }

  const Shape& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  PrecisionMode precision() const { return precision_; }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> span() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> span() const {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Scalar* sample(int n) { return data_.data() + n * shape_.sample(); }
  const Scalar* sample(int n) const { return data_.data() + n * shape_.sample(); }
  Scalar* channel(int n, int c) { return sample(n) + c * shape_.plane(); }
  const Scalar* channel(int n, int c) const { return sample(n) + c * shape_.plane(); }

  Scalar& operator()(int n, int c, int y, int x) {
    return data_[index(n, c, y, x)];
  }
  Scalar operator()(int n, int c, int y, int x) const {
    return data_[index(n, c, y, x)];
  }

  Scalar item() const {
    if (data_.size() != 1) throw ShapeError("Tensor::item on " + shape_.str());
    return data_[0];
  }

  // Retags and re-rounds.
  void set_precision(PrecisionMode precision) {
    precision_ = precision;
    round();
  }

  // Re-rounds every element to the current precision tag.
  void round() {
    if (precision_ != PrecisionMode::FP32) {
      for (Eigen::Index i = 0; i < data_.size(); ++i) {
        data_[i] = round_to_precision(data_[i], precision_);
      }
    }
    if (NonFiniteProbe::active()) {
      std::uint64_t bad = 0;
      for (Eigen::Index i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) ++bad;
      }
      NonFiniteProbe::observe(static_cast<std::uint64_t>(data_.size()), bad);
    }
  }

  Tensor reshaped(Shape shape) const {
    if (shape.count() != shape_.count()) {
      throw ShapeError("reshape " + shape_.str() + " -> " + shape.str());
    }
    return Tensor(shape, data_, precision_);
  }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, data_.template cast<To>(), precision_);
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && (data_ == other.data_).all();
  }

 private:
  Eigen::Index index(int n, int c, int y, int x) const {
    return ((static_cast<Eigen::Index>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  Storage data_;
  PrecisionMode precision_ = PrecisionMode::FP32;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename Scalar>
Tensor<Scalar> finish(Tensor<Scalar> t) {
  t.round();
  return t;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Binary ops take the emulated precision when one operand is plain FP32.
inline PrecisionMode merge_precision(PrecisionMode a, PrecisionMode b) {
  if (a == b || b == PrecisionMode::FP32) return a;
  if (a == PrecisionMode::FP32) return b;
  throw ShapeError("binary op mixes fp16 and bf16 operands");
}

template <typename Scalar, typename F>
Tensor<Scalar> map(const Tensor<Scalar>& x, F f) {
  Tensor<Scalar> out(x.shape(), x.precision());
  // Scalar lambdas only: Eigen's packet transcendentals differ from the
  // scalar tail path, which would make results depend on array offsets.
  out.array() = x.array().unaryExpr(f);
  return finish(std::move(out));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

// Direct cross-correlation with zero padding. weight is (out_c, in_c, k, k)
// and bias holds out_c values in any shape. Each output element is
// accumulated as bias + sum over (in_c, ky, kx) in that order.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, int stride = 1, int padding = 0) {
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  detail::require(ws.c == is.c, "conv2d: input has " + std::to_string(is.c) +
                                    " channels, weight expects " + std::to_string(ws.c));
  detail::require(ws.h == ws.w && ws.h % 2 == 1, "conv2d: kernel must be square and odd");
  detail::require(stride >= 1 && padding >= 0, "conv2d: bad stride/padding");
  detail::require(bias.size() == ws.n, "conv2d: bias length must equal out channels");
  const int k = ws.h;
  const int oh = (is.h + 2 * padding - k) / stride + 1;
  const int ow = (is.w + 2 * padding - k) / stride + 1;
  detail::require(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");

  Tensor<Scalar> out(Shape{is.n, ws.n, oh, ow}, input.precision());
  for (int n = 0; n < is.n; ++n) {
    for (int oc = 0; oc < ws.n; ++oc) {
      Scalar* dst = out.channel(n, oc);
      std::fill(dst, dst + static_cast<Eigen::Index>(oh) * ow, bias.data()[oc]);
      for (int ic = 0; ic < is.c; ++ic) {
        const Scalar* src = input.channel(n, ic);
        const Scalar* wk = weight.data() + (static_cast<Eigen::Index>(oc) * ws.c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const Scalar wv = wk[ky * k + kx];
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= is.h) continue;
              Scalar* row = dst + static_cast<Eigen::Index>(oy) * ow;
              const Scalar* srow = src + static_cast<Eigen::Index>(iy) * is.w;
              // Valid ox range for this kx.
              int x0 = 0;
              while (x0 < ow && x0 * stride - padding + kx < 0) ++x0;
              int x1 = ow;
              while (x1 > x0 && (x1 - 1) * stride - padding + kx >= is.w) --x1;
              if (stride == 1) {
                const Scalar* s = srow - padding + kx;
                for (int ox = x0; ox < x1; ++ox) row[ox] += wv * s[ox];
              } else {
                for (int ox = x0; ox < x1; ++ox) {
                  row[ox] += wv * srow[ox * stride - padding + kx];
                }
              }
            }
          }
        }
      }
    }
  }
  return detail::finish(std::move(out));
}

namespace detail {

// Output columns [x0, x1) whose tap kx lands inside the input row.
inline std::pair<int, int> valid_columns(int out_w, int in_w, int stride, int padding, int kx) {
  int x0 = 0;
  while (x0 < out_w && x0 * stride - padding + kx < 0) ++x0;
  int x1 = out_w;
  while (x1 > x0 && (x1 - 1) * stride - padding + kx >= in_w) --x1;
  return {x0, x1};
}

}  // namespace detail

// Adjoint of conv2d with respect to its input.
template <typename Scalar>
Tensor<Scalar> conv2d_grad_input(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& weight,
                                 const Shape& input_shape, int stride, int padding) {
  const Shape& ws = weight.shape();
  const Shape& gs = grad_out.shape();
  const int k = ws.h;
  Tensor<Scalar> gin(input_shape);
  for (int n = 0; n < gs.n; ++n) {
    for (int oc = 0; oc < ws.n; ++oc) {
      const Scalar* g = grad_out.channel(n, oc);
      for (int ic = 0; ic < ws.c; ++ic) {
        Scalar* dst = gin.channel(n, ic);
        const Scalar* wk = weight.data() + (static_cast<Eigen::Index>(oc) * ws.c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const Scalar wv = wk[ky * k + kx];
            for (int oy = 0; oy < gs.h; ++oy) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= input_shape.h) continue;
              const auto [x0, x1] = detail::valid_columns(gs.w, input_shape.w, stride, padding, kx);
              Scalar* drow = dst + static_cast<Eigen::Index>(iy) * input_shape.w;
              const Scalar* grow = g + static_cast<Eigen::Index>(oy) * gs.w;
              for (int ox = x0; ox < x1; ++ox) drow[ox * stride - padding + kx] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
  return gin;
}

// Adjoint of conv2d with respect to its weight.
template <typename Scalar>
Tensor<Scalar> conv2d_grad_weight(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                  const Shape& weight_shape, int stride, int padding) {
  const Shape& is = input.shape();
  const Shape& gs = grad_out.shape();
  const int k = weight_shape.h;
  Tensor<Scalar> gw(weight_shape);
  for (int n = 0; n < gs.n; ++n) {
    for (int oc = 0; oc < weight_shape.n; ++oc) {
      const Scalar* g = grad_out.channel(n, oc);
      for (int ic = 0; ic < weight_shape.c; ++ic) {
        const Scalar* src = input.channel(n, ic);
        Scalar* wk = gw.data() + (static_cast<Eigen::Index>(oc) * weight_shape.c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            Scalar acc = 0;
            for (int oy = 0; oy < gs.h; ++oy) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= is.h) continue;
              const auto [x0, x1] = detail::valid_columns(gs.w, is.w, stride, padding, kx);
              const Scalar* srow = src + static_cast<Eigen::Index>(iy) * is.w;
              const Scalar* grow = g + static_cast<Eigen::Index>(oy) * gs.w;
              for (int ox = x0; ox < x1; ++ox) acc += srow[ox * stride - padding + kx] * grow[ox];
            }
            wk[ky * k + kx] += acc;
          }
        }
      }
    }
  }
  return gw;
}

// Per-output-channel sum of grad_out, the bias adjoint.
template <typename Scalar>
Tensor<Scalar> channel_sum(const Tensor<Scalar>& grad_out, const Shape& bias_shape) {
  const Shape& gs = grad_out.shape();
  Tensor<Scalar> gb(bias_shape);
  for (int n = 0; n < gs.n; ++n) {
    for (int c = 0; c < gs.c; ++c) {
      const Scalar* g = grad_out.channel(n, c);
      Scalar acc = 0;
      for (Eigen::Index i = 0; i < gs.plane(); ++i) acc += g[i];
      gb.data()[c] += acc;
    }
  }
  return gb;
}

// ---------------------------------------------------------------------------
// Space-to-depth

// out(n, c*s*s + dy*s + dx, y, x) = in(n, c, y*s + dy, x*s + dx).
template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, int s) {
  const Shape& is = input.shape();
  detail::require(s >= 1, "pixel_unshuffle: factor must be >= 1");
  detail::require(is.h % s == 0 && is.w % s == 0,
                  "pixel_unshuffle: " + is.str() + " not divisible by " + std::to_string(s));
  const int oh = is.h / s;
  const int ow = is.w / s;
  Tensor<Scalar> out(Shape{is.n, is.c * s * s, oh, ow}, input.precision());
  for (int n = 0; n < is.n; ++n)
    for (int c = 0; c < is.c; ++c)
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx) {
          const int oc = (c * s + dy) * s + dx;
          for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) out(n, oc, y, x) = input(n, c, y * s + dy, x * s + dx);
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, int s) {
  const Shape& is = input.shape();
  detail::require(s >= 1, "pixel_shuffle: factor must be >= 1");
  detail::require(is.c % (s * s) == 0,
                  "pixel_shuffle: channels " + std::to_string(is.c) + " not divisible by s^2");
  const int oc_count = is.c / (s * s);
  Tensor<Scalar> out(Shape{is.n, oc_count, is.h * s, is.w * s}, input.precision());
  for (int n = 0; n < is.n; ++n)
    for (int c = 0; c < oc_count; ++c)
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx) {
          const int ic = (c * s + dy) * s + dx;
          for (int y = 0; y < is.h; ++y)
            for (int x = 0; x < is.w; ++x) out(n, c, y * s + dy, x * s + dx) = input(n, ic, y, x);
        }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
}

template <typename Scalar>
Tensor<Scalar> silu(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) { return v * sigmoid(v); });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) { return v > 0 ? v : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) {
    return v > 20 ? v : std::log1p(std::exp(v));
  });
}

template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) { return std::abs(v); });
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) { return v * v; });
}

template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& x, Scalar lo, Scalar hi) {
  return detail::map(x, [lo, hi](Scalar v) { return v < lo ? lo : (v > hi ? hi : v); });
}

// Rounds half away from zero; independent of the floating-point environment.
template <typename Scalar>
Tensor<Scalar> round_nearest(const Tensor<Scalar>& x) {
  return detail::map(x, [](Scalar v) { return std::round(v); });
}

template <typename Scalar>
Tensor<Scalar> mul_scalar(const Tensor<Scalar>& x, Scalar k) {
  Tensor<Scalar> out(x.shape(), x.precision());
  out.array() = x.array() * k;
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar k) {
  Tensor<Scalar> out(x.shape(), x.precision());
  out.array() = x.array() + k;
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "add: " + a.shape().str() + " vs " + b.shape().str());
  Tensor<Scalar> out(a.shape(), detail::merge_precision(a.precision(), b.precision()));
  out.array() = a.array() + b.array();
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "sub: " + a.shape().str() + " vs " + b.shape().str());
  Tensor<Scalar> out(a.shape(), detail::merge_precision(a.precision(), b.precision()));
  out.array() = a.array() - b.array();
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.shape() == b.shape(), "mul: " + a.shape().str() + " vs " + b.shape().str());
  Tensor<Scalar> out(a.shape(), detail::merge_precision(a.precision(), b.precision()));
  out.array() = a.array() * b.array();
  return detail::finish(std::move(out));
}

// x(n,c,y,x) * scale[c]; scale holds exactly x.c values.
template <typename Scalar>
Tensor<Scalar> mul_channel(const Tensor<Scalar>& x, const Tensor<Scalar>& scale) {
  const Shape& s = x.shape();
  detail::require(scale.size() == s.c, "mul_channel: scale length must equal channels");
  Tensor<Scalar> out(s, x.precision());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const Scalar k = scale.data()[c];
      const Scalar* src = x.channel(n, c);
      Scalar* dst = out.channel(n, c);
      for (Eigen::Index i = 0; i < s.plane(); ++i) dst[i] = src[i] * k;
    }
  return detail::finish(std::move(out));
}

// Sum of all elements as a (1,1,1,1) tensor, accumulated in index order.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor<Scalar> out(Shape{1, 1, 1, 1}, x.precision());
  out.data()[0] = acc;
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  detail::require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
                  "concat_channels: " + sa.str() + " vs " + sb.str());
  Tensor<Scalar> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w},
                     detail::merge_precision(a.precision(), b.precision()));
  for (int n = 0; n < sa.n; ++n) {
    std::copy(a.sample(n), a.sample(n) + sa.sample(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + sb.sample(), out.sample(n) + sa.sample());
  }
  return detail::finish(std::move(out));
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, int begin, int count) {
  const Shape& s = x.shape();
  detail::require(begin >= 0 && count >= 0 && begin + count <= s.c,
                  "slice_channels: range out of bounds for " + s.str());
  Tensor<Scalar> out(Shape{s.n, count, s.h, s.w}, x.precision());
  for (int n = 0; n < s.n; ++n) {
    std::copy(x.channel(n, begin), x.channel(n, begin) + count * s.plane(), out.sample(n));
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat_batch(std::span<const Tensor<Scalar>> parts) {
  detail::require(!parts.empty(), "concat_batch: no inputs");
  Shape s = parts.front().shape();
  int n = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    detail::require(ps.c == s.c && ps.h == s.h && ps.w == s.w, "concat_batch: shape mismatch");
    n += ps.n;
  }
  s.n = n;
  Tensor<Scalar> out(s, parts.front().precision());
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + offset);
    offset += p.size();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> slice_batch(const Tensor<Scalar>& x, int begin, int count = 1) {
  const Shape& s = x.shape();
  detail::require(begin >= 0 && count >= 0 && begin + count <= s.n,
                  "slice_batch: range out of bounds for " + s.str());
  Tensor<Scalar> out(Shape{count, s.c, s.h, s.w}, x.precision());
  std::copy(x.sample(begin), x.sample(begin) + count * s.sample(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

// 2x2 mean pooling.
template <typename Scalar>
Tensor<Scalar> downsample2x(const Tensor<Scalar>& x) {
  const Shape& s = x.shape();
  detail::require(s.h % 2 == 0 && s.w % 2 == 0, "downsample2x: odd spatial dims " + s.str());
  Tensor<Scalar> out(Shape{s.n, s.c, s.h / 2, s.w / 2}, x.precision());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h / 2; ++y)
        for (int xx = 0; xx < s.w / 2; ++xx) {
          const Scalar total = x(n, c, 2 * y, 2 * xx) + x(n, c, 2 * y, 2 * xx + 1) +
                               x(n, c, 2 * y + 1, 2 * xx) + x(n, c, 2 * y + 1, 2 * xx + 1);
          out(n, c, y, xx) = total * Scalar(0.25);
        }
  return detail::finish(std::move(out));
}

// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Tensor<Scalar> upsample2x(const Tensor<Scalar>& x) {
  const Shape& s = x.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, s.h * 2, s.w * 2}, x.precision());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h * 2; ++y)
        for (int xx = 0; xx < s.w * 2; ++xx) out(n, c, y, xx) = x(n, c, y / 2, xx / 2);
  return out;
}

// Adjoint of upsample2x: sums each 2x2 block.
template <typename Scalar>
Tensor<Scalar> upsample2x_adjoint(const Tensor<Scalar>& g) {
  const Shape& s = g.shape();
  Tensor<Scalar> out(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out(n, c, y / 2, x / 2) += g(n, c, y, x);
  return out;
}

// k x k mean pooling (k divides the spatial dims).
template <typename Scalar>
Tensor<Scalar> avg_pool(const Tensor<Scalar>& x, int k) {
  const Shape& s = x.shape();
  detail::require(k >= 1 && s.h % k == 0 && s.w % k == 0, "avg_pool: dims not divisible");
  Tensor<Scalar> out(Shape{s.n, s.c, s.h / k, s.w / k}, x.precision());
  const Scalar inv = Scalar(1) / Scalar(k * k);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h / k; ++y)
        for (int xx = 0; xx < s.w / k; ++xx) {
          Scalar acc = 0;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) acc += x(n, c, y * k + dy, xx * k + dx);
          out(n, c, y, xx) = acc * inv;
        }
  return detail::finish(std::move(out));
}

// k x k min pooling (k divides the spatial dims).
template <typename Scalar>
Tensor<Scalar> min_pool(const Tensor<Scalar>& x, int k) {
  const Shape& s = x.shape();
  detail::require(k >= 1 && s.h % k == 0 && s.w % k == 0, "min_pool: dims not divisible");
  Tensor<Scalar> out(Shape{s.n, s.c, s.h / k, s.w / k}, x.precision());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h / k; ++y)
        for (int xx = 0; xx < s.w / k; ++xx) {
          Scalar m = x(n, c, y * k, xx * k);
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) m = std::min(m, x(n, c, y * k + dy, xx * k + dx));
          out(n, c, y, xx) = m;
        }
  return out;
}

// ---------------------------------------------------------------------------
// Backward warping

namespace detail {

struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

// Border-clamped source coordinates for sampling at (px, py).
inline BilinearTap bilinear_tap(double px, double py, int w, int h) {
  px = std::clamp(px, 0.0, static_cast<double>(w - 1));
  py = std::clamp(py, 0.0, static_cast<double>(h - 1));
  BilinearTap t;
  t.x0 = static_cast<int>(std::floor(px));
  t.y0 = static_cast<int>(std::floor(py));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = px - t.x0;
  t.fy = py - t.y0;
  return t;
}

inline void check_flow(const Shape& in, const Shape& flow) {
  require(flow.c == 2 && flow.h == in.h && flow.w == in.w && (flow.n == 1 || flow.n == in.n),
          "bilinear_sample: flow " + flow.str() + " incompatible with " + in.str());
}

}  // namespace detail

// output(p) = input(p + flow(p)), bilinear, border-clamped. flow channel 0 is
// dx and channel 1 is dy, in pixels. A single-sample flow broadcasts over
// the batch.
template <typename Scalar>
Tensor<Scalar> bilinear_sample(const Tensor<Scalar>& input, const Tensor<Scalar>& flow) {
  const Shape& s = input.shape();
  detail::check_flow(s, flow.shape());
  Tensor<Scalar> out(s, input.precision());
  for (int n = 0; n < s.n; ++n) {
    const int fn = flow.shape().n == 1 ? 0 : n;
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const auto t = detail::bilinear_tap(x + static_cast<double>(flow(fn, 0, y, x)),
                                            y + static_cast<double>(flow(fn, 1, y, x)), s.w, s.h);
        const Scalar fx = static_cast<Scalar>(t.fx);
        const Scalar fy = static_cast<Scalar>(t.fy);
        for (int c = 0; c < s.c; ++c) {
          const Scalar top = (1 - fx) * input(n, c, t.y0, t.x0) + fx * input(n, c, t.y0, t.x1);
          const Scalar bot = (1 - fx) * input(n, c, t.y1, t.x0) + fx * input(n, c, t.y1, t.x1);
          out(n, c, y, x) = (1 - fy) * top + fy * bot;
        }
      }
  }
  return detail::finish(std::move(out));
}

// Adjoint of bilinear_sample with respect to its input (flow held fixed).
template <typename Scalar>
Tensor<Scalar> bilinear_sample_adjoint(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& flow) {
  const Shape& s = grad_out.shape();
  Tensor<Scalar> gin(s);
  for (int n = 0; n < s.n; ++n) {
    const int fn = flow.shape().n == 1 ? 0 : n;
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const auto t = detail::bilinear_tap(x + static_cast<double>(flow(fn, 0, y, x)),
                                            y + static_cast<double>(flow(fn, 1, y, x)), s.w, s.h);
        const Scalar fx = static_cast<Scalar>(t.fx);
        const Scalar fy = static_cast<Scalar>(t.fy);
        for (int c = 0; c < s.c; ++c) {
          const Scalar g = grad_out(n, c, y, x);
          gin(n, c, t.y0, t.x0) += (1 - fy) * (1 - fx) * g;
          gin(n, c, t.y0, t.x1) += (1 - fy) * fx * g;
          gin(n, c, t.y1, t.x0) += fy * (1 - fx) * g;
          gin(n, c, t.y1, t.x1) += fy * fx * g;
        }
      }
  }
  return gin;
}

// Bitwise equality including the sign of zero; used by equivalence checks.
template <typename Scalar>
bool bit_identical(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!(a.shape() == b.shape())) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data(), [](Scalar x, Scalar y) {
    return std::memcmp(&x, &y, sizeof(Scalar)) == 0;
  });
}

}  // namespace rtvc
