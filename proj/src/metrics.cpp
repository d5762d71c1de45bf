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

#include "rtvc/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rtvc/consistency.hpp"
#include "rtvc/errors.hpp"

namespace rtvc {
namespace {

void check_pair(const FrameSequence& a, const FrameSequence& b) {
  if (a.width != b.width || a.height != b.height || a.count() != b.count()) {
    throw ShapeError("metrics: sequences differ in dims or frame count");
  }
  if (a.count() == 0) throw ShapeError("metrics: empty sequences");
}

using Plane = Eigen::ArrayXXd;  // rows = y

Plane luma(const std::vector<std::uint8_t>& rgb, int w, int h) {
  Plane y(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = (static_cast<std::size_t>(r) * w + c) * 3;
      y(r, c) = 0.299 * rgb[i] + 0.587 * rgb[i + 1] + 0.114 * rgb[i + 2];
    }
  return y;
}

constexpr int kWindow = 8;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

// Summed-area table with a zero first row and column.
Plane integral(const Plane& p) {
  Plane s = Plane::Zero(p.rows() + 1, p.cols() + 1);
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      s(r + 1, c + 1) = p(r, c) + s(r, c + 1) + s(r + 1, c) - s(r, c);
  return s;
}

double box(const Plane& s, Eigen::Index r, Eigen::Index c) {
  return s(r + kWindow, c + kWindow) - s(r, c + kWindow) - s(r + kWindow, c) + s(r, c);
}

struct SsimParts {
  double ssim;
  double cs;  // contrast-structure term
};

SsimParts ssim_plane(const Plane& x, const Plane& y) {
  if (x.rows() < kWindow || x.cols() < kWindow) throw ShapeError("ssim: frames smaller than the 8x8 window");
  const Plane sx = integral(x), sy = integral(y);
  const Plane sxx = integral(x * x), syy = integral(y * y), sxy = integral(x * y);
  const double n = kWindow * kWindow;
  double total = 0.0, total_cs = 0.0;
  const Eigen::Index rows = x.rows() - kWindow + 1, cols = x.cols() - kWindow + 1;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double mx = box(sx, r, c) / n, my = box(sy, r, c) / n;
      const double vx = std::max(0.0, box(sxx, r, c) / n - mx * mx);
      const double vy = std::max(0.0, box(syy, r, c) / n - my * my);
      const double cov = box(sxy, r, c) / n - mx * my;
      const double cs = (2 * cov + kC2) / (vx + vy + kC2);
      total_cs += cs;
      total += (2 * mx * my + kC1) / (mx * mx + my * my + kC1) * cs;
    }
  const double count = static_cast<double>(rows * cols);
  return {total / count, total_cs / count};
}

Plane halve(const Plane& p) {
  Plane out(p.rows() / 2, p.cols() / 2);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = 0.25 * (p(2 * r, 2 * c) + p(2 * r + 1, 2 * c) + p(2 * r, 2 * c + 1) + p(2 * r + 1, 2 * c + 1));
  return out;
}

double poly_integral(const std::vector<double>& c, double lo, double hi) {
  double total = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double e = static_cast<double>(k + 1);
    total += c[k] * (std::pow(hi, e) - std::pow(lo, e)) / e;
  }
  return total;
}

void check_curve(const RateQualityCurve& curve) {
  if (curve.size() < 4) throw std::invalid_argument("bd_rate: need at least 4 points per curve");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].bpp > 0) || !std::isfinite(curve[i].bpp) || !std::isfinite(curve[i].quality)) {
      throw std::invalid_argument("bd_rate: points need positive finite bpp and finite quality");
    }
    if (i > 0 && !(curve[i].bpp > curve[i - 1].bpp)) {
      throw std::invalid_argument("bd_rate: bpp must be strictly increasing");
    }
  }
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

PsnrReport psnr(const FrameSequence& a, const FrameSequence& b) {
  check_pair(a, b);
  PsnrReport report;
  for (std::size_t f = 0; f < a.count(); ++f) {
    double se = 0.0;
    for (std::size_t i = 0; i < a.frames[f].size(); ++i) {
      const double d = static_cast<double>(a.frames[f][i]) - b.frames[f][i];
      se += d * d;
    }
    report.per_frame.push_back(psnr_from_mse(se / static_cast<double>(a.frames[f].size())));
  }
  for (double v : report.per_frame) report.mean += v;
  report.mean /= static_cast<double>(report.per_frame.size());
  return report;
}

double ssim(const FrameSequence& a, const FrameSequence& b) {
  check_pair(a, b);
  double total = 0.0;
  for (std::size_t f = 0; f < a.count(); ++f) {
    total += ssim_plane(luma(a.frames[f], a.width, a.height), luma(b.frames[f], b.width, b.height)).ssim;
  }
  return total / static_cast<double>(a.count());
}

double ms_ssim(const FrameSequence& a, const FrameSequence& b) {
  check_pair(a, b);
  static constexpr double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  if (a.width < 128 || a.height < 128) throw ShapeError("ms_ssim: frames must be at least 128x128");
  double total = 0.0;
  for (std::size_t f = 0; f < a.count(); ++f) {
    Plane x = luma(a.frames[f], a.width, a.height);
    Plane y = luma(b.frames[f], b.width, b.height);
    double value = 1.0;
    for (int s = 0; s < 5; ++s) {
      const SsimParts parts = ssim_plane(x, y);
      const double term = s == 4 ? parts.ssim : parts.cs;
      value *= std::pow(std::max(0.0, term), kWeights[s]);
      if (s < 4) {
        x = halve(x);
        y = halve(y);
      }
    }
    total += value;
  }
  return total / static_cast<double>(a.count());
}

double flicker_metric(std::span<const TensorF> frames, std::span<const TensorF> flows,
                      std::span<const TensorF> masks) {
  if (frames.size() < 2) throw std::invalid_argument("flicker: need at least two frames");
  if (!flows.empty() && flows.size() != frames.size()) {
    throw std::invalid_argument("flicker: need one flow per frame (flows[0] unused)");
  }
  if (!masks.empty() && masks.size() != frames.size()) {
    throw std::invalid_argument("flicker: need one mask per frame (masks[0] unused)");
  }
  double total = 0.0;
  for (std::size_t t = 1; t < frames.size(); ++t) {
    TensorF flow, mask;
    if (flows.empty()) {
      flow = block_matching_flow(frames[t], frames[t - 1]);
      mask = occlusion_mask(flow, block_matching_flow(frames[t - 1], frames[t]));
    } else {
      flow = flows[t];
      mask = masks.empty() ? TensorF::constant(Shape{1, 1, frames[t].shape().h, frames[t].shape().w}, 1.0f)
                           : masks[t];
    }
    total += pixel_warping_loss(frames[t], frames[t - 1], flow, mask).item();
  }
  return total / static_cast<double>(frames.size() - 1);
}

std::vector<double> fit_log_rate(const RateQualityCurve& curve) {
  check_curve(curve);
  const Eigen::Index n = static_cast<Eigen::Index>(curve.size());
  Eigen::MatrixXd v(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = curve[i].quality;
    v(i, 0) = 1.0;
    v(i, 1) = q;
    v(i, 2) = q * q;
    v(i, 3) = q * q * q;
    rhs(i) = std::log10(curve[i].bpp);
  }
  const Eigen::VectorXd c = v.colPivHouseholderQr().solve(rhs);
  return {c(0), c(1), c(2), c(3)};
}

std::optional<double> bd_rate(const RateQualityCurve& anchor, const RateQualityCurve& test) {
  const std::vector<double> ca = fit_log_rate(anchor);
  const std::vector<double> ct = fit_log_rate(test);
  auto range = [](const RateQualityCurve& c) {
    auto [lo, hi] = std::minmax_element(c.begin(), c.end(),
                                        [](const RatePoint& a, const RatePoint& b) { return a.quality < b.quality; });
    return std::pair(lo->quality, hi->quality);
  };
  const auto [alo, ahi] = range(anchor);
  const auto [tlo, thi] = range(test);
  const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
  if (!(hi > lo)) return std::nullopt;
  const double diff = (poly_integral(ct, lo, hi) - poly_integral(ca, lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, diff) - 1.0);
}

RateQualityCurve parse_curve_csv(std::string_view text) {
  RateQualityCurve curve;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used = 0;
      const double bpp = std::stod(line.substr(0, comma), &used);
      const double q = std::stod(line.substr(comma + 1));
      curve.push_back({bpp, q});
    } catch (const std::logic_error&) {
      if (curve.empty() && line_no == 1) continue;  // header
      throw DataError("curve csv line " + std::to_string(line_no) + ": expected bpp,quality");
    }
  }
  return curve;
}

RateQualityCurve load_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_curve_csv(ss.str());
}

}  // namespace rtvc
