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

#include "rtvc/precision.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace rtvc {
namespace {

// Round-to-nearest-even on the raw float pattern, discarding `drop` low bits.
// Carries propagate into the exponent, which is exactly the RNE behaviour at
// binade boundaries.
std::uint32_t round_bits(std::uint32_t magnitude, int drop) {
  const std::uint32_t lsb = (magnitude >> drop) & 1u;
  const std::uint32_t bias = (1u << (drop - 1)) - 1u + lsb;
  return (magnitude + bias) & ~((1u << drop) - 1u);
}

float round_fp16(float x) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t sign = bits & 0x80000000u;
  const std::uint32_t magnitude = bits & 0x7FFFFFFFu;
  const int exponent = static_cast<int>(magnitude >> 23) - 127;

  std::uint32_t rounded;
  if (exponent < -25) {
    rounded = 0;  // below half the smallest binary16 subnormal
  } else if (exponent == -25) {
    // [2^-25, 2^-24): the tie at exactly 2^-25 goes to zero (even).
    rounded = (magnitude == 0x33000000u) ? 0u : 0x33800000u;
  } else if (exponent < -14) {
    rounded = round_bits(magnitude, -1 - exponent);
  } else {
    rounded = round_bits(magnitude, 13);
  }
  float out = std::bit_cast<float>(rounded);
  if (out > kFp16MaxFinite) out = INFINITY;
  return std::bit_cast<float>(std::bit_cast<std::uint32_t>(out) | sign);
}

float round_bf16(float x) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t sign = bits & 0x80000000u;
  return std::bit_cast<float>(round_bits(bits & 0x7FFFFFFFu, 16) | sign);
}

struct ProbeSlot {
  NonFiniteProbe* active = nullptr;
};
thread_local ProbeSlot probe_slot;

}  // namespace

std::string_view to_string(PrecisionMode mode) {
  switch (mode) {
    case PrecisionMode::FP32:
      return "fp32";
    case PrecisionMode::FP16Emu:
      return "fp16";
    case PrecisionMode::BF16Emu:
      return "bf16";
  }
  return "?";
}

float round_to_precision(float x, PrecisionMode mode) {
  if (std::isnan(x) || std::isinf(x)) return x;
  switch (mode) {
    case PrecisionMode::FP32:
      return x;
    case PrecisionMode::FP16Emu:
      return round_fp16(x);
    case PrecisionMode::BF16Emu:
      return round_bf16(x);
  }
  return x;
}

NonFiniteProbe::NonFiniteProbe() {
  if (probe_slot.active != nullptr) {
    throw std::logic_error("NonFiniteProbe: nested probes are not supported");
  }
  probe_slot.active = this;
}

NonFiniteProbe::~NonFiniteProbe() { probe_slot.active = nullptr; }

bool NonFiniteProbe::active() { return probe_slot.active != nullptr; }

void NonFiniteProbe::observe(std::uint64_t values, std::uint64_t non_finite) {
  if (NonFiniteProbe* p = probe_slot.active) {
    p->inspected_ += values;
    p->count_ += non_finite;
  }
}

}  // namespace rtvc
