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

#include "rtvc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rtvc {
namespace {

constexpr int kEscapeBin = kBins;
// Beyond this many standard deviations the CDF is taken as exactly 0 or 1.
constexpr double kCdfCutoff = 16.0;

void check_scale(double scale) {
  // Bounds compare at float precision: scales travel as 32-bit values.
  constexpr double lo = static_cast<float>(kScaleMin);
  constexpr double hi = static_cast<float>(kScaleMax);
  if (!(scale >= lo && scale <= hi)) {
    throw ScaleOutOfRange("entropy: scale " + std::to_string(scale) + " outside [" +
                          std::to_string(kScaleMin) + ", " + std::to_string(kScaleMax) + "]");
  }
}

void check_shapes(const SymbolPlane& symbols, const GaussianParams& params) {
  detail::require(params.mean.shape() == params.scale.shape(),
                  "entropy: mean/scale shape mismatch");
  detail::require(static_cast<Eigen::Index>(symbols.symbols.size()) == params.mean.size(),
                  "entropy: symbol count does not match params " + params.mean.shape().str());
}

double cdf_at_edge(double edge, double mean, double scale) {
  const double z = (edge - mean) / scale;
  if (z < -kCdfCutoff) return 0.0;
  if (z > kCdfCutoff) return 1.0;
  return normal_cdf(z);
}

class RangeEncoder {
 public:
  void encode(std::uint32_t start, std::uint32_t size, int total_bits) {
    range_ >>= total_bits;
    low_ += static_cast<std::uint64_t>(start) * range_;
    range_ *= size;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  static constexpr std::uint32_t kTop = 1u << 24;

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
  }

  std::uint32_t peek(int total_bits) {
    range_ >>= total_bits;
    const std::uint32_t v = code_ / range_;
    if (v >= (1u << total_bits)) throw DataError("range decoder: corrupt stream");
    return v;
  }

  void update(std::uint32_t start, std::uint32_t size) {
    code_ -= start * range_;
    range_ *= size;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next();
      range_ <<= 8;
    }
  }

 private:
  static constexpr std::uint32_t kTop = 1u << 24;

  std::uint32_t next() {
    if (pos_ >= in_.size()) throw TruncatedStream("range decoder: stream truncated");
    return in_[pos_++];
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace

GaussianParams GaussianParams::clamped(TensorF mean, TensorF scale) {
  scale.array() = scale.array().max(static_cast<float>(kScaleMin)).min(static_cast<float>(kScaleMax));
  return GaussianParams{std::move(mean), std::move(scale)};
}

SymbolPlane SymbolPlane::from_tensor(const TensorF& rounded) {
  SymbolPlane plane;
  plane.shape = rounded.shape();
  plane.symbols.resize(static_cast<std::size_t>(rounded.size()));
  for (Eigen::Index i = 0; i < rounded.size(); ++i) {
    const float v = rounded.data()[i];
    if (!std::isfinite(v) || std::abs(v) > kEscapeLimit) {
      throw DataError("SymbolPlane: value " + std::to_string(v) + " cannot be coded");
    }
    plane.symbols[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(v);
  }
  return plane;
}

std::vector<std::uint8_t> Bitstream::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(4 + bytes.size());
  const auto n = static_cast<std::uint32_t>(bytes.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

Bitstream Bitstream::parse(std::span<const std::uint8_t> data, std::size_t* consumed) {
  if (data.size() < 4) throw TruncatedStream("bitstream: missing length prefix");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(data[i]) << (8 * i);
  if (data.size() - 4 < n) throw TruncatedStream("bitstream: payload shorter than declared");
  Bitstream b;
  b.bytes.assign(data.begin() + 4, data.begin() + 4 + n);
  if (consumed != nullptr) *consumed = 4 + n;
  return b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double discretized_gaussian_pmf(int k, double mean, double scale) {
  k = std::clamp(k, -kSymbolMax, kSymbolMax);
  const double upper = k == kSymbolMax ? 1.0 : cdf_at_edge(k + 0.5, mean, scale);
  const double lower = k == -kSymbolMax ? 0.0 : cdf_at_edge(k - 0.5, mean, scale);
  return std::max(0.0, upper - lower);
}

FrequencyTable build_frequency_table(double mean, double scale) {
  constexpr std::uint32_t kSpread = kFrequencyTotal - (kBins + 1);
  std::array<std::uint32_t, kBins + 1> freq{};
  std::uint32_t assigned = 0;
  double previous_cdf = 0.0;
  int mode = 0;
  double mode_p = -1.0;
  for (int bin = 0; bin < kBins; ++bin) {
    const int k = bin - kSymbolMax;
    const double cdf = bin == kBins - 1 ? 1.0 : cdf_at_edge(k + 0.5, mean, scale);
    const double p = std::max(0.0, cdf - previous_cdf);
    previous_cdf = cdf;
    const auto share = static_cast<std::uint32_t>(std::floor(p * kSpread));
    freq[bin] = 1 + share;
    assigned += share;
    if (p > mode_p) {
      mode_p = p;
      mode = bin;
    }
  }
  freq[kEscapeBin] = 1;
  freq[mode] += kSpread - assigned;

  FrequencyTable cdf{};
  for (int bin = 0; bin <= kBins; ++bin) cdf[bin + 1] = cdf[bin] + freq[bin];
  return cdf;
}

Bitstream encode(const SymbolPlane& symbols, const GaussianParams& params) {
  check_shapes(symbols, params);
  Bitstream out;
  if (symbols.symbols.empty()) return out;
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.symbols.size(); ++i) {
    const double scale = params.scale.data()[i];
    check_scale(scale);
    const FrequencyTable cdf = build_frequency_table(params.mean.data()[i], scale);
    const std::int32_t k = symbols.symbols[i];
    if (!symbols.escaped(i)) {
      const int bin = k + kSymbolMax;
      enc.encode(cdf[bin], cdf[bin + 1] - cdf[bin], kFrequencyBits);
      continue;
    }
    if (k < -kEscapeLimit || k > kEscapeLimit) {
      throw std::out_of_range("encode: symbol " + std::to_string(k) + " exceeds 16-bit escape");
    }
    enc.encode(cdf[kEscapeBin], 1, kFrequencyBits);
    const auto raw = static_cast<std::uint16_t>(static_cast<std::int16_t>(k));
    enc.encode(raw >> 8, 1, 8);
    enc.encode(raw & 0xFF, 1, 8);
  }
  out.bytes = enc.finish();
  return out;
}

SymbolPlane decode(const Bitstream& bits, const GaussianParams& params) {
  detail::require(params.mean.shape() == params.scale.shape(), "decode: mean/scale shape mismatch");
  SymbolPlane out;
  out.shape = params.mean.shape();
  out.symbols.resize(static_cast<std::size_t>(params.mean.size()));
  if (out.symbols.empty()) return out;
  RangeDecoder dec(bits.bytes);
  for (std::size_t i = 0; i < out.symbols.size(); ++i) {
    const double scale = params.scale.data()[i];
    check_scale(scale);
    const FrequencyTable cdf = build_frequency_table(params.mean.data()[i], scale);
    const std::uint32_t target = dec.peek(kFrequencyBits);
    // Last bin whose start is <= target.
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const int bin = static_cast<int>(it - cdf.begin()) - 1;
    dec.update(cdf[bin], cdf[bin + 1] - cdf[bin]);
    if (bin != kEscapeBin) {
      out.symbols[i] = bin - kSymbolMax;
      continue;
    }
    const std::uint32_t hi = dec.peek(8);
    dec.update(hi, 1);
    const std::uint32_t lo = dec.peek(8);
    dec.update(lo, 1);
    out.symbols[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>((hi << 8) | lo));
  }
  return out;
}

double estimate_rate(const SymbolPlane& symbols, const GaussianParams& params) {
  check_shapes(symbols, params);
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.symbols.size(); ++i) {
    const double p = discretized_gaussian_pmf(symbols.symbols[i], params.mean.data()[i],
                                              params.scale.data()[i]);
    bits -= std::log2(std::max(p, kLikelihoodFloor));
    if (symbols.escaped(i)) bits += 16.0;
  }
  return bits;
}

namespace detail {

RateTerm gaussian_rate_term(double residual, double scale) {
  const double a = std::abs(residual);
  const double u = (0.5 - a) / scale;
  const double l = (-0.5 - a) / scale;
  const double p = normal_cdf(u) - normal_cdf(l);
  if (!(p > kLikelihoodFloor)) return {-std::log2(kLikelihoodFloor), 0.0, 0.0};
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  const double pdf_u = inv_sqrt_2pi * std::exp(-0.5 * u * u);
  const double pdf_l = inv_sqrt_2pi * std::exp(-0.5 * l * l);
  const double dp_da = (pdf_l - pdf_u) / scale;
  const double dp_ds = (-u * pdf_u + l * pdf_l) / scale;
  const double dbits_dp = -1.0 / (p * std::numbers::ln2);
  const double sign = residual > 0 ? 1.0 : (residual < 0 ? -1.0 : 0.0);
  return {-std::log2(p), dbits_dp * dp_da * sign, dbits_dp * dp_ds};
}

}  // namespace detail
}  // namespace rtvc
