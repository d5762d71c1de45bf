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

#include "rtvc/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rtvc/consistency.hpp"
#include "rtvc/frame_reconstructor.hpp"
#include "rtvc/latent_compressor.hpp"

namespace rtvc {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::D: return "D";
    case LossKind::RD: return "RD";
    case LossKind::RDP: return "RDP";
    case LossKind::DPT: return "DPT";
    case LossKind::RDPT: return "RDPT";
  }
  return "?";
}

std::string to_string(TrainableSet set) {
  switch (set) {
    case TrainableSet::Compressor: return "compressor";
    case TrainableSet::CompressorVbp: return "compressor+vbp";
    case TrainableSet::Reconstructor: return "reconstructor";
    case TrainableSet::All: return "all";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  for (LossKind k : {LossKind::D, LossKind::RD, LossKind::RDP, LossKind::DPT, LossKind::RDPT}) {
    if (text == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

TrainableSet parse_trainable_set(std::string_view text) {
  for (TrainableSet s : {TrainableSet::Compressor, TrainableSet::CompressorVbp,
                         TrainableSet::Reconstructor, TrainableSet::All}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown trainable set '" + std::string(text) + "'");
}

bool is_trainable(TrainableSet set, std::string_view name) {
  auto starts = [&](std::string_view prefix) { return name.substr(0, prefix.size()) == prefix; };
  if (name == "config") return false;
  switch (set) {
    case TrainableSet::Compressor: return starts("lc.") || starts("head.");
    case TrainableSet::CompressorVbp: return starts("lc.") || starts("vbp.") || starts("head.");
    case TrainableSet::Reconstructor: return starts("fr.") || starts("head.");
    case TrainableSet::All: return true;
  }
  return false;
}

double StageConfig::learning_rate(int step) const {
  if (steps <= 1) return lr_start;
  const double progress = static_cast<double>(step) / (steps - 1);
  return lr_end + (lr_start - lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

StageConfig default_stage(int id, int steps) {
  StageConfig s;
  s.id = id;
  s.steps = steps;
  s.frames = 3;
  s.compress_intra = true;
  switch (id) {
    case 1:
      s.frames = 2;
      s.lr_start = s.lr_end = 1e-4;
      s.loss = LossKind::D;
      s.fixed_quality = 15;
      s.compress_intra = false;
      break;
    case 2:
      s.lr_start = s.lr_end = 1e-4;
      s.loss = LossKind::RD;
      s.fixed_quality = 15;
      s.compress_intra = false;
      break;
    case 3:
      s.lr_start = 1e-4;
      s.lr_end = 5e-6;
      s.trainable = TrainableSet::CompressorVbp;
      s.loss = LossKind::RD;
      s.temporal_weights = true;
      break;
    case 4:
      s.lr_start = 5e-5;
      s.lr_end = 1e-6;
      s.trainable = TrainableSet::CompressorVbp;
      s.loss = LossKind::RDP;
      s.temporal_weights = true;
      break;
    case 5:
      s.lr_start = s.lr_end = 1e-5;
      s.trainable = TrainableSet::CompressorVbp;
      s.loss = LossKind::RDP;
      s.temporal_weights = true;
      s.cascade = true;
      break;
    case 6:
      s.lr_start = 3e-4;
      s.lr_end = 1e-5;
      s.trainable = TrainableSet::Reconstructor;
      s.loss = LossKind::DPT;
      break;
    case 7:
      s.lr_start = 5e-6;
      s.lr_end = 1e-6;
      s.trainable = TrainableSet::All;
      s.loss = LossKind::RDPT;
      s.temporal_weights = true;
      s.cascade = true;
      break;
    default:
      throw UnknownStage("unknown stage id " + std::to_string(id));
  }
  return s;
}

std::vector<StageConfig> default_curriculum(int steps_per_stage) {
  std::vector<StageConfig> out;
  for (int id = 1; id <= 7; ++id) out.push_back(default_stage(id, steps_per_stage));
  return out;
}

std::array<double, kQualityLevels> LambdaSampler::values() {
  std::array<double, kQualityLevels> v{};
  for (int q = 0; q < kQualityLevels; ++q) v[q] = lambda_for_quality(q);
  return v;
}

void StageLog::write_csv(std::ostream& os) const {
  os << "step,loss,bpp,mse\n";
  os << std::setprecision(9);
  for (const StepMetrics& m : steps) os << m.step << ',' << m.loss << ',' << m.bpp << ',' << m.mse << '\n';
}

namespace {

const PerceptualProxy<float>& proxy() {
  static const PerceptualProxy<float> instance;
  return instance;
}

VarF mean_of(const VarF& x) {
  return mul_scalar(sum(x), 1.0f / static_cast<float>(x.value().size()));
}

struct SampleResult {
  VarF loss;
  double bpp = 0.0;
  double mse = 0.0;
};

// Forward pass over one cropped sample on `tape`.
SampleResult forward_sample(Tape<float>& tape, const ParamMap<VarF>& p, const Model& model,
                            const Sequence& seq, const StageConfig& stage, int q, double lambda,
                            const TemporalWeights& tw) {
  const ModelConfig& cfg = model.config;
  const int frames = static_cast<int>(seq.frames.size());
  const Shape& fs = seq.frames.front().shape();
  const float pixels = static_cast<float>(fs.h) * static_cast<float>(fs.w);
  const int lh = fs.h / cfg.unshuffle, lw = fs.w / cfg.unshuffle;

  ShiftState<VarF> shift(ShiftConfig{8});
  if (stage.uses_reconstructor()) register_shift_layers(shift, cfg, lh, lw);

  std::vector<FrameTerms<VarF>> terms;
  std::vector<VarF> recon(frames);
  double bpp = 0.0, mse = 0.0;
  int counted = 0;

  VarF previous_latent;
  TensorF previous_latent_t;
  for (int t = 0; t < frames; ++t) {
    const bool in_loss = stage.cascade ? (t > 0 || stage.compress_intra) : t == frames - 1;
    // The shift chain needs every frame through the reconstructor.
    const bool need_recon = in_loss || stage.uses_reconstructor();
    const TensorF raw = to_latent(seq.frames[t], cfg.unshuffle);

    VarF latent, ctx_mix, rate;
    if (stage.trains_compressor()) {
      TemporalContexts<VarF> ctx;
      if (t == 0) {
        const TemporalContexts<TensorF> z = zero_contexts(cfg, lh, lw, PrecisionMode::FP32);
        ctx = {tape.constant(z.mix), tape.constant(z.entropy)};
      } else {
        ctx = extract_contexts(previous_latent, p);
      }
      const LatentCoding<VarF> coding = code_latent(tape.constant(raw), ctx, q, p);
      latent = coding.latent;
      ctx_mix = ctx.mix;
      rate = mul_scalar(gaussian_rate_bits(coding.residual, coding.scale), 1.0f / pixels);
      previous_latent = stage.cascade ? latent : detach(latent);
    } else {
      // Frozen compressor: plain tensor arithmetic, then lifted as constants.
      const TemporalContexts<TensorF> ctx =
          t == 0 ? zero_contexts(cfg, lh, lw, PrecisionMode::FP32)
                 : extract_contexts(previous_latent_t, model.weights);
      const LatentCoding<TensorF> coding = code_latent(raw, ctx, q, model.weights);
      previous_latent_t = coding.latent;
      latent = tape.constant(coding.latent);
      ctx_mix = tape.constant(ctx.mix);
      rate = tape.constant(mul_scalar(gaussian_rate_bits(coding.residual, coding.scale), 1.0f / pixels));
    }

    if (!need_recon) continue;
    const VarF enhanced = stage.uses_reconstructor() ? enhance(latent, ctx_mix, shift, p, cfg) : latent;
    recon[t] = reconstruct(enhanced, p, cfg);
    if (!in_loss) continue;

    const VarF target = tape.constant(seq.frames[t]);
    FrameTerms<VarF> f;
    f.index = t;
    f.rate_bpp = rate;
    f.mse = mean_of(square(sub(recon[t], target)));
    const bool perceptual = stage.loss == LossKind::RDP || stage.loss == LossKind::DPT ||
                            stage.loss == LossKind::RDPT;
    const VarF zero = tape.constant(TensorF::scalar(0.0f));
    f.perc_l = zero;
    f.perc_d = zero;
    f.icc = zero;
    if (perceptual) {
      const VarF fx = proxy()(recon[t]);
      const VarF ft = tape.constant(proxy()(seq.frames[t]));
      const VarF diff = sub(fx, ft);
      f.perc_l = mean_of(abs(diff));
      f.perc_d = mean_of(square(diff));
    }
    const bool wants_icc = stage.icc && (stage.loss == LossKind::DPT || stage.loss == LossKind::RDPT);
    if (wants_icc && t > 0 && recon[t - 1].tape() != nullptr) {
      const VarF lp = pixel_warping_loss(recon[t], recon[t - 1], seq.flows[t], seq.masks[t]);
      const VarF lf = feature_warping_loss(recon[t], recon[t - 1], seq.flows[t], seq.masks[t],
                                           [](const VarF& x) { return proxy()(x); });
      f.icc = icc_loss(lp, lf, IccWeights{});
    }
    bpp += rate.value().item();
    mse += f.mse.value().item();
    ++counted;
    terms.push_back(f);
  }

  SampleResult out;
  out.loss = compute_stage_loss<VarF>(stage, terms, lambda, tw);
  out.bpp = bpp / counted;
  out.mse = mse / counted;
  return out;
}

void validate_stage(const StageConfig& s, const ModelConfig& cfg, std::span<const Sequence> data) {
  if (s.id < 1 || s.id > 7) throw UnknownStage("unknown stage id " + std::to_string(s.id));
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const Shape& fs = data.front().frames.front().shape();
  if (s.steps < 0 || s.batch < 1 || s.frames < 1) throw std::invalid_argument("train: bad stage sizes");
  if (s.frames > static_cast<int>(data.front().frames.size())) {
    throw std::invalid_argument("train: stage needs more frames than the dataset has");
  }
  if (s.patch_h > fs.h || s.patch_w > fs.w) throw std::invalid_argument("train: patch larger than frames");
  if (s.cascade && s.frames < 2) throw std::invalid_argument("train: cascade needs >= 2 frames");
  if (s.fixed_quality >= 0) check_quality(s.fixed_quality);
  validate_geometry(cfg, s.patch_h, s.patch_w, 8);
}

}  // namespace

StageLog train_stage(Model& model, std::span<const Sequence> dataset, const StageConfig& stage,
                     std::uint32_t seed, const TrainOptions& options) {
  validate_stage(stage, model.config, dataset);
  Rng rng(seed);
  LambdaSampler sampler(seed ^ 0x9E3779B9u);
  OptimizerState opt;
  StageLog log;
  log.stage = stage.id;

  for (int step = 0; step < stage.steps; ++step) {
    LambdaSampler::Draw draw = stage.fixed_quality >= 0
                                   ? LambdaSampler::Draw{stage.fixed_quality, lambda_for_quality(stage.fixed_quality)}
                                   : sampler.draw();

    Tape<float> tape;
    ParamMap<VarF> params;
    std::map<int, std::string> names;
    for (const auto& [name, w] : model.weights) {
      if (name == "config") continue;
      if (is_trainable(stage.trainable, name)) {
        const VarF v = tape.parameter(w);
        names.emplace(v.id(), name);
        params.emplace(name, v);
      } else {
        params.emplace(name, tape.constant(w));
      }
    }

    VarF total;
    double bpp = 0.0, mse = 0.0;
    for (int b = 0; b < stage.batch; ++b) {
      const Sequence& full = dataset[rng.uniform_int(0, static_cast<int>(dataset.size()) - 1)];
      const Shape& fs = full.frames.front().shape();
      const int first = rng.uniform_int(0, static_cast<int>(full.frames.size()) - stage.frames);
      const int top = rng.uniform_int(0, fs.h - stage.patch_h);
      const int left = rng.uniform_int(0, fs.w - stage.patch_w);
      const Sequence sample = crop_sequence(full, first, stage.frames, top, left, stage.patch_h, stage.patch_w);
      const SampleResult r = forward_sample(tape, params, model, sample, stage, draw.quality,
                                            draw.lambda, options.temporal_weights);
      total = b == 0 ? r.loss : add(total, r.loss);
      bpp += r.bpp;
      mse += r.mse;
    }
    total = mul_scalar(total, 1.0f / static_cast<float>(stage.batch));
    const double loss = total.value().item();
    if (!std::isfinite(loss)) {
      throw TrainingError("stage " + std::to_string(stage.id) + " step " + std::to_string(step) +
                          ": non-finite loss (q=" + std::to_string(draw.quality) + ")");
    }

    const auto grads = tape.backward(total);
    std::map<std::string, TensorF> named;
    for (const auto& [id, g] : grads) named.emplace(names.at(id), g);
    opt.config.learning_rate = stage.learning_rate(step) * options.lr_scale;
    adam_step(opt, model.weights, named);

    StepMetrics m{step, loss, bpp / stage.batch, mse / stage.batch, draw.quality, draw.lambda};
    log.steps.push_back(m);
    if (options.progress && (step % 10 == 0 || step + 1 == stage.steps)) {
      *options.progress << "stage " << stage.id << " step " << step << " loss " << loss << " bpp "
                        << m.bpp << " mse " << m.mse << '\n';
    }
  }
  return log;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

}  // namespace

CurriculumConfig parse_curriculum(std::string_view text) {
  CurriculumConfig cfg;
  std::vector<StageConfig> stages;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("curriculum line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      if (key == "stage") {
        stages.push_back(default_stage(std::stoi(value)));
        continue;
      }
      if (stages.empty()) {
        if (key == "seed") cfg.seed = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "model") cfg.model = value == "paper" ? ModelConfig::paper_scale() : ModelConfig::desk();
        else if (key == "height") cfg.data.height = std::stoi(value);
        else if (key == "width") cfg.data.width = std::stoi(value);
        else if (key == "dataset_frames") cfg.data.frames = std::stoi(value);
        else if (key == "sequences") cfg.sequences = std::stoi(value);
        else if (key == "rotation") cfg.data.allow_rotation = parse_bool(value);
        else if (key == "lr_scale") cfg.lr_scale = std::stod(value);
        else if (key == "start_stage") cfg.start_stage = std::stoi(value);
        else if (key == "steps") {
          for (StageConfig& s : cfg.stages) s.steps = std::stoi(value);
        } else throw std::invalid_argument("unknown key");
        continue;
      }
      StageConfig& s = stages.back();
      if (key == "steps") s.steps = std::stoi(value);
      else if (key == "batch") s.batch = std::stoi(value);
      else if (key == "patch_h") s.patch_h = std::stoi(value);
      else if (key == "patch_w") s.patch_w = std::stoi(value);
      else if (key == "frames") s.frames = std::stoi(value);
      else if (key == "lr_start") s.lr_start = std::stod(value);
      else if (key == "lr_end") s.lr_end = std::stod(value);
      else if (key == "trainable") s.trainable = parse_trainable_set(value);
      else if (key == "loss") s.loss = parse_loss_kind(value);
      else if (key == "temporal_weights") s.temporal_weights = parse_bool(value);
      else if (key == "cascade") s.cascade = parse_bool(value);
      else if (key == "compress_intra") s.compress_intra = parse_bool(value);
      else if (key == "quality") s.fixed_quality = std::stoi(value);
      else if (key == "icc") s.icc = parse_bool(value);
      else throw std::invalid_argument("unknown key");
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("curriculum line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
  }
  if (!stages.empty()) cfg.stages = std::move(stages);
  return cfg;
}

CurriculumConfig load_curriculum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read curriculum " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_curriculum(ss.str());
}

std::filesystem::path stage_weights_path(const std::filesystem::path& out_dir, int stage) {
  return out_dir / ("stage" + std::to_string(stage) + ".nvcw");
}

CurriculumResult run_curriculum(const CurriculumConfig& cfg, const std::filesystem::path& out_dir,
                                std::ostream* progress) {
  std::filesystem::create_directories(out_dir);
  CurriculumResult result;
  if (cfg.start_stage > 1) {
    result.model = model_from_weights(load_weights(stage_weights_path(out_dir, cfg.start_stage - 1)));
  } else {
    result.model = init_model(cfg.model, cfg.seed);
  }
  const std::vector<Sequence> data = synthetic_dataset(cfg.seed, cfg.sequences, cfg.data);
  TrainOptions options;
  options.lr_scale = cfg.lr_scale;
  options.progress = progress;
  for (const StageConfig& stage : cfg.stages) {
    if (stage.id < cfg.start_stage) continue;
    StageLog log = train_stage(result.model, data, stage, cfg.seed + 7919u * stage.id, options);
    save_weights(stage_weights_path(out_dir, stage.id), weights_with_config(result.model));
    std::ofstream csv(out_dir / ("stage" + std::to_string(stage.id) + "_metrics.csv"));
    log.write_csv(csv);
    result.logs.push_back(std::move(log));
  }
  save_weights(out_dir / "final.nvcw", weights_with_config(result.model));
  return result;
}

}  // namespace rtvc
