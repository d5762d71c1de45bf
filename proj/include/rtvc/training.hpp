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

// Staged training at desk scale: stage configs mirroring the seven-stage
// recipe, the loss families, quality/lambda sampling, cyclic temporal
// weights, cascaded multi-frame training and the curriculum runner.
//
// Stages 1-5 train the latent compressor with the decoder head standing in
// for the frozen pixel decoder (the U-Net is bypassed). Stage 6 trains the
// frame reconstructor on top of the frozen compressor. Stage 7 trains all
// parameters jointly.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtvc/autodiff.hpp"
#include "rtvc/dataset.hpp"
#include "rtvc/model.hpp"
#include "rtvc/random.hpp"

namespace rtvc {

enum class LossKind { D, RD, RDP, DPT, RDPT };
enum class TrainableSet { Compressor, CompressorVbp, Reconstructor, All };

std::string to_string(LossKind kind);
std::string to_string(TrainableSet set);
LossKind parse_loss_kind(std::string_view text);
TrainableSet parse_trainable_set(std::string_view text);

// Whether a parameter name belongs to the stage's trainable set. The
// decoder head trains wherever it is used.
bool is_trainable(TrainableSet set, std::string_view name);

struct StageConfig {
  int id = 1;
  int steps = 50;
  int batch = 1;
  int patch_h = 64;
  int patch_w = 64;
  int frames = 2;
  double lr_start = 1e-4;
  double lr_end = 1e-4;  // cosine decay from lr_start
  TrainableSet trainable = TrainableSet::Compressor;
  LossKind loss = LossKind::D;
  bool temporal_weights = false;
  bool cascade = false;
  bool compress_intra = false;  // the intra frame contributes to the loss
  int fixed_quality = -1;       // >= 0 pins q (and lambda); -1 samples
  bool icc = true;

  double learning_rate(int step) const;
  bool uses_reconstructor() const {
    return trainable == TrainableSet::Reconstructor || trainable == TrainableSet::All;
  }
  bool trains_compressor() const { return trainable != TrainableSet::Reconstructor; }
};

class UnknownStage : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

StageConfig default_stage(int id, int steps = 50);
std::vector<StageConfig> default_curriculum(int steps_per_stage = 50);

struct TemporalWeights {
  std::vector<double> w{0.5, 1.2, 0.5, 0.9};

  double at(int frame_index) const { return w[static_cast<std::size_t>(frame_index) % w.size()]; }
};

// Uniform quality index with its lambda.
class LambdaSampler {
 public:
  struct Draw {
    int quality;
    double lambda;
  };

  explicit LambdaSampler(std::uint32_t seed) : rng_(seed) {}
  Draw draw() {
    const int q = rng_.uniform_int(0, kQualityLevels - 1);
    return {q, lambda_for_quality(q)};
  }
  static std::array<double, kQualityLevels> values();

 private:
  Rng rng_;
};

// Scalar per-frame loss ingredients; each member is a scalar X.
template <typename X>
struct FrameTerms {
  int index = 0;  // display order within the sample, for w_t
  X rate_bpp;
  X mse;
  X perc_l;
  X perc_d;
  X icc;
};

namespace detail {

template <typename X>
X weighted_sum(std::initializer_list<std::pair<double, const X*>> terms) {
  using S = typename X::value_type;
  X acc;
  bool first = true;
  for (const auto& [k, x] : terms) {
    if (k == 0.0) continue;
    X term = mul_scalar(*x, static_cast<S>(k));
    acc = first ? term : add(acc, term);
    first = false;
  }
  return acc;
}

}  // namespace detail

// The stage's formula per frame; averaged over the given frames for cascade
// stages, otherwise the last given frame's value.
template <typename X>
X compute_stage_loss(const StageConfig& stage, std::span<const FrameTerms<X>> frames,
                     double lambda, const TemporalWeights& tw = {}) {
  if (stage.id < 1 || stage.id > 7) throw UnknownStage("unknown stage id " + std::to_string(stage.id));
  if (frames.empty()) throw std::invalid_argument("compute_stage_loss: no frames");
  using S = typename X::value_type;
  auto frame_loss = [&](const FrameTerms<X>& f) -> X {
    const double lw = lambda * (stage.temporal_weights ? tw.at(f.index) : 1.0);
    switch (stage.loss) {
      case LossKind::D:
        return detail::weighted_sum<X>({{lw, &f.mse}});
      case LossKind::RD:
        return detail::weighted_sum<X>({{1.0, &f.rate_bpp}, {lw, &f.mse}});
      case LossKind::RDP:
        return detail::weighted_sum<X>(
            {{1.0, &f.rate_bpp}, {lw * 0.5, &f.mse}, {lw * 0.025, &f.perc_l}, {lw * 0.025, &f.perc_d}});
      case LossKind::DPT:
        return detail::weighted_sum<X>({{2.0, &f.mse}, {1.0, &f.perc_l}, {1.0, &f.perc_d}, {0.1, &f.icc}});
      case LossKind::RDPT:
        return detail::weighted_sum<X>({{1.0, &f.rate_bpp},
                                        {lw * 0.3, &f.mse},
                                        {lw * 0.03, &f.perc_l},
                                        {lw * 0.03, &f.perc_d},
                                        {lw * 0.003, &f.icc}});
    }
    throw std::logic_error("compute_stage_loss: bad loss kind");
  };
  if (!stage.cascade) return frame_loss(frames.back());
  X total = frame_loss(frames.front());
  for (std::size_t i = 1; i < frames.size(); ++i) total = add(total, frame_loss(frames[i]));
  return mul_scalar(total, static_cast<S>(1.0 / static_cast<double>(frames.size())));
}

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double bpp = 0.0;
  double mse = 0.0;
  int quality = 0;
  double lambda = 0.0;
};

struct StageLog {
  int stage = 0;
  std::vector<StepMetrics> steps;

  void write_csv(std::ostream& os) const;  // step,loss,bpp,mse
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  double lr_scale = 10.0;  // desk-scale step counts need larger steps
  TemporalWeights temporal_weights;
  std::ostream* progress = nullptr;
};

// Runs one stage in place on `model`. Throws TrainingError on a non-finite
// loss, naming the step.
StageLog train_stage(Model& model, std::span<const Sequence> dataset, const StageConfig& stage,
                     std::uint32_t seed, const TrainOptions& options = {});

struct CurriculumConfig {
  std::uint32_t seed = 1;
  ModelConfig model = ModelConfig::desk();
  DatasetConfig data{64, 64, 4, true};
  int sequences = 16;
  double lr_scale = 10.0;
  int start_stage = 1;  // > 1 resumes from stage{start-1}.nvcw in the out dir
  std::vector<StageConfig> stages = default_curriculum();
};

// key=value lines, '#' comments. Global keys come first; "stage=N" opens a
// block initialised from that stage's defaults.
CurriculumConfig parse_curriculum(std::string_view text);
CurriculumConfig load_curriculum(const std::filesystem::path& path);

struct CurriculumResult {
  Model model;
  std::vector<StageLog> logs;
};

// Writes stage{k}.nvcw and stage{k}_metrics.csv after each stage and
// final.nvcw at the end. A failing stage leaves earlier artifacts in place.
CurriculumResult run_curriculum(const CurriculumConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* progress = nullptr);

std::filesystem::path stage_weights_path(const std::filesystem::path& out_dir, int stage);

}  // namespace rtvc
