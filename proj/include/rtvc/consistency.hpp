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

// Temporal consistency machinery used as a training-only objective: flow
// estimation, forward-backward occlusion masks, pixel and feature warping
// losses and their weighted combination.
//
// A flow field is a (1, 2, H, W) tensor holding the t -> t-1 displacement in
// pixels (channel 0 = dx, channel 1 = dy). A mask is (1, 1, H, W) in {0, 1}.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rtvc/autodiff.hpp"
#include "rtvc/model.hpp"

namespace rtvc {

struct IccWeights {
  double pixel = 1.0;
  double feature = 2e-4;
};

// Per-block integer displacement minimising the channel-summed SAD between
// the block in `current` and the displaced block in `previous` within
// +-radius (border-clamped sampling). Ties prefer the smallest |dx|+|dy|,
// then the smallest dy, then the smallest dx. Partial edge blocks are
// matched as-is.
TensorF block_matching_flow(const TensorF& current, const TensorF& previous, int block = 8,
                            int radius = 4);

// 1 where |v_fwd(p) + v_bwd(p + v_fwd(p))| <= tau, else 0.
TensorF occlusion_mask(const TensorF& forward, const TensorF& backward, float tau = 1.5f);

// "NVCF": magic, u32 H, u32 W, then H*W dx values and H*W dy values (f32 LE).
std::vector<std::uint8_t> serialize_flow(const TensorF& flow);
TensorF parse_flow(std::span<const std::uint8_t> bytes);
void save_flow(const std::filesystem::path& path, const TensorF& flow);
TensorF load_flow(const std::filesystem::path& path);

namespace detail {

template <typename Scalar>
Tensor<Scalar> repeat_channels(const Tensor<Scalar>& mask, int channels) {
  Tensor<Scalar> out(Shape{mask.shape().n, channels, mask.shape().h, mask.shape().w});
  for (int n = 0; n < mask.shape().n; ++n)
    for (int c = 0; c < channels; ++c)
      std::copy(mask.sample(n), mask.sample(n) + mask.shape().plane(), out.channel(n, c));
  return out;
}

// sum(mask * per_pixel) / sum(mask), 0 when the mask is empty.
template <typename X>
X masked_mean(const X& per_element, const Tensor<typename X::value_type>& mask) {
  using S = typename X::value_type;
  const double total = mask.array().template cast<double>().sum();
  if (total == 0.0) return constant_like(per_element, Tensor<S>::scalar(S(0)));
  const int c = value_of(per_element).shape().c;
  const X weighted =
      mul(per_element, constant_like(per_element, repeat_channels(mask, c)));
  return mul_scalar(sum(weighted), static_cast<S>(1.0 / total));
}

}  // namespace detail

// Occlusion-masked L1 between the current frame and the backward-warped
// previous frame, summed over channels and averaged over valid pixels.
template <typename X>
X pixel_warping_loss(const X& current, const X& previous,
                     const Tensor<typename X::value_type>& flow,
                     const Tensor<typename X::value_type>& mask) {
  const X warped = bilinear_sample(previous, flow);
  return detail::masked_mean(abs(sub(current, warped)), mask);
}

// Feature-space counterpart: squared L2 between features of the current
// frame and warped features of the previous frame. The flow is mean-pooled
// to feature resolution and divided by the pooling factor; the mask is
// min-pooled so a feature cell counts only when fully valid.
template <typename X, typename FeatureFn>
X feature_warping_loss(const X& current, const X& previous,
                       const Tensor<typename X::value_type>& flow,
                       const Tensor<typename X::value_type>& mask, FeatureFn&& features) {
  using S = typename X::value_type;
  const X fc = features(current);
  const X fp = features(previous);
  const int factor = value_of(current).shape().h / value_of(fc).shape().h;
  detail::require(factor >= 1 && value_of(fc).shape().h * factor == value_of(current).shape().h &&
                      value_of(fc).shape().w * factor == value_of(current).shape().w,
                  "feature_warping_loss: feature map is not an integer downsample");
  const Tensor<S> flow_l =
      factor == 1 ? flow : mul_scalar(avg_pool(flow, factor), S(1) / S(factor));
  const Tensor<S> mask_l = factor == 1 ? mask : min_pool(mask, factor);
  return detail::masked_mean(square(sub(fc, bilinear_sample(fp, flow_l))), mask_l);
}

template <typename X>
X icc_loss(const X& pixel_term, const X& feature_term, const IccWeights& w) {
  using S = typename X::value_type;
  return add(mul_scalar(pixel_term, static_cast<S>(w.pixel)),
             mul_scalar(feature_term, static_cast<S>(w.feature)));
}

// Frozen stand-in for a pretrained perceptual network: four 3x3 conv layers
// with relu, two 2x2 mean-pool downsamples, weights drawn from seed 0x5EED.
template <typename Scalar>
class PerceptualProxy {
 public:
  static constexpr std::uint32_t kSeed = 0x5EED;

  PerceptualProxy();

  template <typename X>
  X operator()(const X& x) const {
    auto layer = [&](const X& in, int i) {
      return relu(conv2d(in, constant_like(in, weights_[2 * i]),
                         constant_like(in, weights_[2 * i + 1]), 1, 1));
    };
    X h = layer(x, 0);
    h = layer(downsample2x(h), 1);
    h = layer(downsample2x(h), 2);
    return layer(h, 3);
  }

  int downsample_factor() const { return 4; }
  const std::vector<Tensor<Scalar>>& weights() const { return weights_; }

 private:
  std::vector<Tensor<Scalar>> weights_;
};

extern template class PerceptualProxy<float>;
extern template class PerceptualProxy<double>;

}  // namespace rtvc
