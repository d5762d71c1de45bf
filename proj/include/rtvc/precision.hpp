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

#pragma once

#include <cstdint>
#include <string_view>

namespace rtvc {

// Storage is always 32-bit (or 64-bit in gradient checks); the emulated modes
// re-round every op output to the narrower format.
enum class PrecisionMode : std::uint8_t { FP32, FP16Emu, BF16Emu };

std::string_view to_string(PrecisionMode mode);

// Round-to-nearest-even into `mode`. FP16Emu overflows to +-inf past 65504;
// NaN passes through unchanged.
float round_to_precision(float x, PrecisionMode mode);

inline double round_to_precision(double x, PrecisionMode mode) {
  if (mode == PrecisionMode::FP32) return x;
  return static_cast<double>(round_to_precision(static_cast<float>(x), mode));
}

inline constexpr float kFp16MaxFinite = 65504.0f;

// Counts non-finite values produced by rounded op outputs on the current
// thread while alive. Nesting is not supported.
class NonFiniteProbe {
 public:
  NonFiniteProbe();
  ~NonFiniteProbe();
  NonFiniteProbe(const NonFiniteProbe&) = delete;
  NonFiniteProbe& operator=(const NonFiniteProbe&) = delete;

  std::uint64_t count() const { return count_; }
  std::uint64_t inspected() const { return inspected_; }

  // Called by the tensor kernels; no-op when no probe is installed.
  static bool active();
  static void observe(std::uint64_t values, std::uint64_t non_finite);

 private:
  std::uint64_t count_ = 0;
  std::uint64_t inspected_ = 0;
};

}  // namespace rtvc
