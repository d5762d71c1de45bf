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

// Quality metrics on 8-bit frames, the temporal flicker report and the
// Bjontegaard delta-rate comparator.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rtvc/frame_io.hpp"

namespace rtvc {

inline constexpr double kPsnrCap = 99.0;

struct PsnrReport {
  std::vector<double> per_frame;
  double mean = 0.0;
};

// 10 log10(255^2 / MSE) per frame over all RGB samples; zero MSE reports the cap.
PsnrReport psnr(const FrameSequence& a, const FrameSequence& b);
double psnr_from_mse(double mse);

// Mean SSIM over all 8x8 windows (stride 1) of BT.601 luma and all frames.
double ssim(const FrameSequence& a, const FrameSequence& b);

// Five-scale MS-SSIM on luma with the standard exponents. Frames must be at
// least 128 pixels on each side.
double ms_ssim(const FrameSequence& a, const FrameSequence& b);

// Mean over consecutive pairs of the occlusion-masked pixel warping loss.
// Without flows, block-matching flows and a forward-backward mask are used;
// flows without masks use a full mask. flows[t] / masks[t] relate t to t-1.
double flicker_metric(std::span<const TensorF> frames, std::span<const TensorF> flows = {},
                      std::span<const TensorF> masks = {});

struct RatePoint {
  double bpp;
  double quality;
};

using RateQualityCurve = std::vector<RatePoint>;

// Average bitrate difference of `test` against `anchor` in percent, from
// cubic fits of log10(bpp) against quality integrated over the overlapping
// quality range. Empty when the ranges do not overlap.
std::optional<double> bd_rate(const RateQualityCurve& anchor, const RateQualityCurve& test);

// Coefficients c0..c3 of the least-squares cubic log10(bpp) = sum c_k q^k.
std::vector<double> fit_log_rate(const RateQualityCurve& curve);

// "bpp,quality" lines; a non-numeric first line is taken as a header.
RateQualityCurve parse_curve_csv(std::string_view text);
RateQualityCurve load_curve_csv(const std::filesystem::path& path);

}  // namespace rtvc
