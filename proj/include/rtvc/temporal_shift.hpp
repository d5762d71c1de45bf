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

// Online temporal shift: inside each residual branch the first c/P channels
// of frame t are replaced by the same channels of frame t-1. The sequential
// form keeps a per-layer cache; the batch form shifts inside a batch of
// consecutive frames and carries the last sample's slice to the next batch.
// Neither form has parameters or arithmetic; outputs are selections of input
// and cached elements.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "rtvc/autodiff.hpp"
#include "rtvc/tensor.hpp"

namespace rtvc {

struct ShiftConfig {
  int P = 8;
};

class UnregisteredLayer : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline int shift_segment(int channels, const ShiftConfig& cfg) {
  if (cfg.P < 1) throw ShapeError("shift: P must be >= 1");
  if (channels % cfg.P != 0) {
    throw ShapeError("shift: " + std::to_string(channels) + " channels not divisible by P=" +
                     std::to_string(cfg.P));
  }
  return channels / cfg.P;
}

// Per-layer slice cache, zero at sequence start. X is Tensor<S> or Var<S>.
template <typename X>
class ShiftState {
 public:
  using Scalar = typename X::value_type;

  explicit ShiftState(ShiftConfig cfg = {}) : cfg_(cfg) {}

  const ShiftConfig& config() const { return cfg_; }

  // Registers a shifted layer whose input is (n, channels, h, w).
  void register_layer(int layer_id, int channels, int h, int w,
                      PrecisionMode precision = PrecisionMode::FP32) {
    const int seg = shift_segment(channels, cfg_);
    zeros_[layer_id] = Tensor<Scalar>(Shape{1, seg, h, w}, precision);
    slices_.erase(layer_id);
  }

  bool has_layer(int layer_id) const { return zeros_.count(layer_id) != 0; }
  std::size_t layer_count() const { return zeros_.size(); }

  // Back to the zero state of a sequence start; registrations are kept.
  void reset() { slices_.clear(); }

  // The cached slice, materialised as the same value kind as `like`.
  X slice(int layer_id, const X& like) const {
    auto it = slices_.find(layer_id);
    if (it != slices_.end()) return it->second;
    return constant_like(like, zero_slice(layer_id));
  }

  const Tensor<Scalar>& zero_slice(int layer_id) const {
    auto it = zeros_.find(layer_id);
    if (it == zeros_.end()) {
      throw UnregisteredLayer("shift: layer " + std::to_string(layer_id) + " not registered");
    }
    return it->second;
  }

  void store(int layer_id, X slice) {
    const Shape& expect = zero_slice(layer_id).shape();
    detail::require(value_of(slice).shape() == expect,
                    "shift: slice " + value_of(slice).shape().str() + " does not match layer " +
                        std::to_string(layer_id) + " " + expect.str());
    slices_.insert_or_assign(layer_id, std::move(slice));
  }

 private:
  ShiftConfig cfg_;
  std::map<int, Tensor<Scalar>> zeros_;
  std::map<int, X> slices_;
};

// The inter-batch carry has the same per-layer discipline as ShiftState.
class BatchCarry : public ShiftState<TensorF> {
 public:
  using ShiftState<TensorF>::ShiftState;
};

// y = concat(cached slice, x[c/P:]); caches x[:c/P] for the next frame.
template <typename X>
X online_shift(const X& x, ShiftState<X>& state, int layer_id) {
  const Shape s = value_of(x).shape();  // copy: recording may grow the tape
  detail::require(s.n == 1, "online_shift: expects a single frame, got " + s.str());
  const int seg = shift_segment(s.c, state.config());
  X previous = state.slice(layer_id, x);
  X y = concat_channels(previous, slice_channels(x, seg, s.c - seg));
  state.store(layer_id, slice_channels(x, 0, seg));
  return y;
}

// Batch form over N consecutive frames. Sample i >= 1 receives sample i-1's
// first segment, sample 0 receives the carry. A set restart flag makes that
// sample receive zeros instead (sequence restart at an intra frame). The
// carry becomes sample N-1's first segment.
template <typename Scalar>
Tensor<Scalar> batch_shift(const Tensor<Scalar>& x, ShiftState<Tensor<Scalar>>& carry,
                           int layer_id, std::span<const bool> restart = {}) {
  const Shape& s = x.shape();
  detail::require(restart.empty() || static_cast<int>(restart.size()) == s.n,
                  "batch_shift: restart flags must cover the batch");
  const int seg = shift_segment(s.c, carry.config());
  const Tensor<Scalar>& zero = carry.zero_slice(layer_id);
  detail::require(zero.shape() == (Shape{1, seg, s.h, s.w}),
                  "batch_shift: layer " + std::to_string(layer_id) + " registered for a different shape");
  const Eigen::Index seg_len = static_cast<Eigen::Index>(seg) * s.plane();

  Tensor<Scalar> y = x;
  const Tensor<Scalar> incoming = carry.slice(layer_id, zero);
  for (int i = 0; i < s.n; ++i) {
    const Scalar* src = nullptr;
    if (!restart.empty() && restart[i]) {
      src = zero.data();
    } else if (i == 0) {
      src = incoming.data();
    } else {
      src = x.sample(i - 1);
    }
    std::copy(src, src + seg_len, y.sample(i));
  }
  if (s.n > 0) carry.store(layer_id, slice_channels(slice_batch(x, s.n - 1), 0, seg));
  return y;
}

}  // namespace rtvc
