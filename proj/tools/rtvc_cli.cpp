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

// Command-line front end: encode, decode, train, bench, metrics, bdrate, flow.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rtvc/codec.hpp"
#include "rtvc/consistency.hpp"
#include "rtvc/frame_io.hpp"
#include "rtvc/metrics.hpp"
#include "rtvc/training.hpp"

namespace fs = std::filesystem;
using namespace rtvc;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

Model load_model(const fs::path& path) { return model_from_weights(load_weights(path)); }

TensorF read_single_frame(const fs::path& path) {
  int w = 0, h = 0;
  const std::vector<std::uint8_t> rgb = decode_ppm(read_file(path), w, h);
  FrameSequence seq{w, h, {rgb}};
  return seq.to_tensors().front();
}

fs::path flow_file(const fs::path& dir, std::size_t t) {
  char name[32];
  std::snprintf(name, sizeof(name), "flow_%06zu.nvcf", t);
  return dir / name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rtvc: real-time neural video codec tools"};
  app.require_subcommand(1);

  // encode
  auto* enc = app.add_subcommand("encode", "Encode frames into a DVRT container");
  std::string enc_input, enc_weights, enc_out;
  int enc_q = 8, enc_intra = 32, enc_p = 8;
  enc->add_option("--input", enc_input, "PPM directory or .nvcr file")->required();
  enc->add_option("--weights", enc_weights, "NVCW weights")->required();
  enc->add_option("--q", enc_q, "Quality index")->check(CLI::Range(0, kQualityLevels - 1));
  enc->add_option("--intra-period", enc_intra, "Frames between intra frames")->check(CLI::Range(1, 65535));
  enc->add_option("--shift-p", enc_p, "Temporal shift ratio P")->check(CLI::Range(1, 255));
  enc->add_option("--out", enc_out, "Output container")->required();

  // decode
  auto* dec = app.add_subcommand("decode", "Decode a DVRT container");
  std::string dec_in, dec_weights, dec_out, dec_mode = "sync";
  int dec_n = 4, dec_q = 0;
  dec->add_option("--in", dec_in, "Input container")->required();
  dec->add_option("--weights", dec_weights, "NVCW weights")->required();
  dec->add_option("--mode", dec_mode, "sync or async")->check(CLI::IsMember({"sync", "async"}));
  dec->add_option("--parallel", dec_n, "Batch size N for async mode")->check(CLI::PositiveNumber);
  dec->add_option("--queue", dec_q, "Queue capacity Q (default 2N)")->check(CLI::NonNegativeNumber);
  dec->add_option("--out", dec_out, "PPM directory or .nvcr file")->required();

  // train
  auto* train = app.add_subcommand("train", "Run the staged training curriculum");
  std::string train_cfg, train_out;
  std::optional<std::uint32_t> train_seed;
  train->add_option("--curriculum", train_cfg, "key=value curriculum file")->required();
  train->add_option("--seed", train_seed, "Overrides the curriculum seed");
  train->add_option("--out-dir", train_out, "Directory for weights and metric logs")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Decode throughput per batch size");
  std::string bench_in, bench_weights;
  std::vector<int> bench_list{1, 2, 4, 8};
  int bench_warmup = 1, bench_runs = 3;
  bench->add_option("--in", bench_in, "Input container")->required();
  bench->add_option("--weights", bench_weights, "NVCW weights")->required();
  bench->add_option("--parallel-list", bench_list, "Comma-separated N values")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_warmup, "Unmeasured runs")->check(CLI::NonNegativeNumber);
  bench->add_option("--runs", bench_runs, "Measured runs (median reported)")->check(CLI::PositiveNumber);

  // metrics
  auto* met = app.add_subcommand("metrics", "PSNR, SSIM and flicker of a test sequence");
  std::string met_ref, met_test, met_flows;
  bool met_ms = false;
  met->add_option("--ref", met_ref, "Reference frames")->required();
  met->add_option("--test", met_test, "Test frames")->required();
  met->add_option("--flows", met_flows, "Directory of flow_%06d.nvcf (frame t to t-1)");
  met->add_flag("--ms-ssim", met_ms, "Also report 5-scale MS-SSIM");

  // bdrate
  auto* bdr = app.add_subcommand(
      "bdrate", "Bjontegaard delta rate (cubic fit of log rate over quality, classical method)");
  std::string bd_anchor, bd_test;
  bdr->add_option("--anchor", bd_anchor, "Anchor curve CSV (bpp,quality)")->required();
  bdr->add_option("--test", bd_test, "Test curve CSV (bpp,quality)")->required();

  // flow
  auto* flow = app.add_subcommand("flow", "Block-matching flow from frame a to frame b");
  std::string flow_a, flow_b, flow_out;
  int flow_block = 8, flow_radius = 4;
  flow->add_option("--a", flow_a, "Current frame (PPM)")->required();
  flow->add_option("--b", flow_b, "Previous frame (PPM)")->required();
  flow->add_option("--out", flow_out, "Output NVCF file")->required();
  flow->add_option("--block", flow_block, "Block size")->check(CLI::PositiveNumber);
  flow->add_option("--radius", flow_radius, "Search radius")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  if (*dec && dec_q != 0 && dec_q < dec_n) {
    std::cerr << "--queue must be >= --parallel\n";
    return kUsageError;
  }

  try {
    if (*enc) {
      const Model model = load_model(enc_weights);
      const std::vector<TensorF> frames = read_frames(enc_input).to_tensors();
      const EncodedVideo video = encode_video(frames, {enc_q, enc_intra, enc_p}, model);
      const std::vector<std::uint8_t> bytes = serialize_video(video);
      write_file(enc_out, bytes);
      const double pixels = double(video.header.width) * video.header.height * video.header.frame_count;
      std::cout << "frames=" << video.header.frame_count << " bytes=" << bytes.size()
                << " bpp=" << 8.0 * bytes.size() / pixels << '\n';
    } else if (*dec) {
      const Model model = load_model(dec_weights);
      const EncodedVideo video = parse_video(read_file(dec_in));
      std::vector<TensorF> frames;
      if (dec_mode == "sync") {
        frames = decode_video_sync(video, model);
      } else {
        DecodeStats stats;
        frames = decode_video_async(video, model, {dec_n, dec_q, {}}, &stats);
        std::cout << stats.log_line() << '\n';
      }
      write_frames(dec_out, FrameSequence::from_tensors(frames));
      std::cout << "frames=" << frames.size() << '\n';
    } else if (*train) {
      CurriculumConfig cfg = load_curriculum(train_cfg);
      if (train_seed) cfg.seed = *train_seed;
      const CurriculumResult result = run_curriculum(cfg, train_out, &std::cout);
      for (const StageLog& log : result.logs) {
        const StepMetrics* last = log.steps.empty() ? nullptr : &log.steps.back();
        std::cout << "stage " << log.stage << " steps=" << log.steps.size();
        if (last) std::cout << " final_loss=" << last->loss;
        std::cout << '\n';
      }
    } else if (*bench) {
      const Model model = load_model(bench_weights);
      const EncodedVideo video = parse_video(read_file(bench_in));
      for (const BenchRow& row : throughput_bench(video, model, bench_list, bench_warmup, bench_runs)) {
        std::cout << row.str() << '\n';
      }
    } else if (*met) {
      const FrameSequence ref = read_frames(met_ref);
      const FrameSequence test = read_frames(met_test);
      const PsnrReport p = psnr(ref, test);
      std::cout << "psnr=" << p.mean << '\n' << "ssim=" << ssim(ref, test) << '\n';
      if (met_ms) std::cout << "ms_ssim=" << ms_ssim(ref, test) << '\n';
      if (test.count() >= 2) {
        const std::vector<TensorF> frames = test.to_tensors();
        std::vector<TensorF> flows;
        if (!met_flows.empty()) {
          flows.push_back(TensorF(Shape{1, 2, test.height, test.width}));
          for (std::size_t t = 1; t < frames.size(); ++t) flows.push_back(load_flow(flow_file(met_flows, t)));
        }
        std::cout << "flicker=" << flicker_metric(frames, flows) << '\n';
      }
    } else if (*bdr) {
      const std::optional<double> v = bd_rate(load_curve_csv(bd_anchor), load_curve_csv(bd_test));
      if (v) {
        std::printf("%.4f\n", *v);
      } else {
        std::printf("N/A\n");
      }
    } else if (*flow) {
      save_flow(flow_out, block_matching_flow(read_single_frame(flow_a), read_single_frame(flow_b),
                                              flow_block, flow_radius));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
