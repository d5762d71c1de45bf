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

// Discretized Gaussian entropy model and a byte-oriented range coder.
//
// Symbols in [-255, 255] are coded with a 16-bit frequency table built from
// the tail-folded discretized Gaussian; anything outside that range codes an
// escape bin followed by the raw value in 16 bits. Coder state is integer
// only (64-bit low, 32-bit range, carry propagated through a cached byte).

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rtvc/autodiff.hpp"
#include "rtvc/errors.hpp"
#include "rtvc/tensor.hpp"

namespace rtvc {

inline constexpr double kScaleMin = 0.04;
inline constexpr double kScaleMax = 256.0;
inline constexpr int kSymbolMax = 255;
inline constexpr int kEscapeLimit = 32767;
inline constexpr int kFrequencyBits = 16;
inline constexpr std::uint32_t kFrequencyTotal = 1u << kFrequencyBits;
inline constexpr int kBins = 2 * kSymbolMax + 1;  // value bins, escape bin follows
inline constexpr double kLikelihoodFloor = 1.0 / kFrequencyTotal;

class ScaleOutOfRange : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct GaussianParams {
  TensorF mean;
  TensorF scale;

  // Clamps every scale into [kScaleMin, kScaleMax].
  static GaussianParams clamped(TensorF mean, TensorF scale);
};

struct SymbolPlane {
  Shape shape;
  std::vector<std::int32_t> symbols;

  static SymbolPlane from_tensor(const TensorF& rounded);
  bool escaped(std::size_t i) const {
    return symbols[i] < -kSymbolMax || symbols[i] > kSymbolMax;
  }
};

struct Bitstream {
  std::vector<std::uint8_t> bytes;

  std::uint64_t bit_length() const { return 8ull * bytes.size(); }

  // [u32 little-endian payload length][payload bytes].
  std::vector<std::uint8_t> serialize() const;
  // Parses one serialized bitstream from the front of `data`; returns the
  // number of bytes consumed through `consumed`.
  static Bitstream parse(std::span<const std::uint8_t> data, std::size_t* consumed = nullptr);
};

// Standard normal CDF.
double normal_cdf(double z);

// P(k) for a Gaussian discretized to unit bins, with the mass beyond
// +-kSymbolMax folded into the extreme bins. `k` is clipped to the range.
double discretized_gaussian_pmf(int k, double mean, double scale);

// Cumulative 16-bit frequencies over kBins value bins plus the escape bin.
// cdf[0] == 0, cdf[kBins + 1] == kFrequencyTotal, every bin >= 1.
using FrequencyTable = std::array<std::uint32_t, kBins + 2>;
FrequencyTable build_frequency_table(double mean, double scale);

Bitstream encode(const SymbolPlane& symbols, const GaussianParams& params);
SymbolPlane decode(const Bitstream& bits, const GaussianParams& params);

// Sum of -log2 P(k_i) (escapes add 16 raw bits), with P floored at 2^-16.
double estimate_rate(const SymbolPlane& symbols, const GaussianParams& params);

// ---------------------------------------------------------------------------
// Differentiable rate term for training: sum over elements of
// -log2(Phi((|r| + 0.5)/s) - Phi((|r| - 0.5)/s)) with the likelihood floored
// at kLikelihoodFloor. Gradients flow to both the residual and the scale.

namespace detail {

struct RateTerm {
  double bits;
  double d_residual;
  double d_scale;
};

RateTerm gaussian_rate_term(double residual, double scale);

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> gaussian_rate_bits(const Tensor<Scalar>& residual, const Tensor<Scalar>& scale) {
  detail::require(residual.shape() == scale.shape(), "gaussian_rate_bits: shape mismatch");
  double total = 0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    total += detail::gaussian_rate_term(residual.data()[i], scale.data()[i]).bits;
  }
  return Tensor<Scalar>::scalar(static_cast<Scalar>(total));
}

template <typename Scalar>
Var<Scalar> gaussian_rate_bits(const Var<Scalar>& residual, const Var<Scalar>& scale) {
  const int ir = residual.id(), is = scale.id();
  return residual.tape()->record(
      gaussian_rate_bits(residual.value(), scale.value()), {residual, scale},
      [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto& r = t.value(ir);
        const auto& s = t.value(is);
        Tensor<Scalar> gr(r.shape()), gs(s.shape());
        const Scalar up = g.item();
        for (Eigen::Index i = 0; i < r.size(); ++i) {
          const auto term = detail::gaussian_rate_term(r.data()[i], s.data()[i]);
          gr.data()[i] = up * static_cast<Scalar>(term.d_residual);
          gs.data()[i] = up * static_cast<Scalar>(term.d_scale);
        }
        t.accumulate(ir, gr);
        t.accumulate(is, gs);
      });
}

}  // namespace rtvc
