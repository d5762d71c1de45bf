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

// Drives the rtvc executable end to end through a shell.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rtvc/codec.hpp"
#include "rtvc/dataset.hpp"
#include "rtvc/frame_io.hpp"
#include "rtvc/weights.hpp"

#ifndef RTVC_CLI
#error "RTVC_CLI must name the rtvc executable"
#endif

using namespace rtvc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(RTVC_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct Workspace {
  fs::path dir = fs::temp_directory_path() / "rtvc_cli_test";
  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto data = synthetic_dataset(3, 1, DatasetConfig{32, 64, 5, true});
    write_frames(dir / "clip.nvcr", FrameSequence::from_tensors(data[0].frames));
    std::ofstream(dir / "tiny.cfg") << "seed=2\nheight=32\nwidth=32\nsequences=1\ndataset_frames=3\n"
                                       "stage=2\nsteps=1\npatch_h=32\npatch_w=32\n";
    std::ofstream(dir / "a.csv") << "bpp,quality\n0.05,28\n0.1,31\n0.2,33.5\n0.4,36\n";
    std::ofstream(dir / "b.csv") << "bpp,quality\n0.1,28\n0.2,31\n0.4,33.5\n0.8,36\n";
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("encode, decode, metrics, bench and train through the executable") {
  Workspace ws;
  REQUIRE(run("train --curriculum " + ws.p("tiny.cfg") + " --out-dir " + ws.p("train")).code == 0);
  CHECK(fs::exists(ws.dir / "train" / "stage2.nvcw"));
  CHECK(fs::exists(ws.dir / "train" / "stage2_metrics.csv"));
  const std::string weights = ws.p("train/final.nvcw");

  REQUIRE(run("encode --input " + ws.p("clip.nvcr") + " --weights " + weights +
              " --q 6 --intra-period 3 --out " + ws.p("clip.dvrt"))
              .code == 0);
  const EncodedVideo video = parse_video(read_file(ws.dir / "clip.dvrt"));
  CHECK(video.header.frame_count == 5);
  CHECK(video.header.intra_period == 3);

  REQUIRE(run("decode --in " + ws.p("clip.dvrt") + " --weights " + weights + " --mode sync --out " +
              ws.p("sync.nvcr"))
              .code == 0);
  REQUIRE(run("decode --in " + ws.p("clip.dvrt") + " --weights " + weights +
              " --mode async --parallel 1 --out " + ws.p("async1.nvcr"))
              .code == 0);
  const Run async4 = run("decode --in " + ws.p("clip.dvrt") + " --weights " + weights +
                         " --mode async --parallel 4 --out " + ws.p("frames"));
  REQUIRE(async4.code == 0);
  CHECK(async4.out.find("latency_frames=3") != std::string::npos);
  const FrameSequence sync = read_frames(ws.dir / "sync.nvcr");
  CHECK(sync.count() == 5);
  CHECK(read_frames(ws.dir / "async1.nvcr") == sync);
  CHECK(read_frames(ws.dir / "frames") == sync);

  const Run metrics = run("metrics --ref " + ws.p("clip.nvcr") + " --test " + ws.p("sync.nvcr"));
  CHECK(metrics.code == 0);
  CHECK(metrics.out.find("psnr") != std::string::npos);
  CHECK(metrics.out.find("flicker") != std::string::npos);

  const Run bench = run("bench --in " + ws.p("clip.dvrt") + " --weights " + weights +
                        " --parallel-list 1,2 --warmup 0 --runs 1");
  CHECK(bench.code == 0);
  CHECK(bench.out.find("N=sync fps=") != std::string::npos);
  CHECK(bench.out.find("N=2 fps=") != std::string::npos);

  const auto frames = read_frames(ws.dir / "clip.nvcr");
  write_frames(ws.dir / "ppm", frames);
  CHECK(run("flow --a " + ws.p("ppm/frame_000001.ppm") + " --b " + ws.p("ppm/frame_000000.ppm") +
            " --out " + ws.p("f.nvcf"))
            .code == 0);
  CHECK(fs::exists(ws.dir / "f.nvcf"));
}

TEST_CASE("bdrate output and exit codes") {
  Workspace ws;
  const Run same = run("bdrate --anchor " + ws.p("a.csv") + " --test " + ws.p("a.csv"));
  CHECK(same.code == 0);
  CHECK(std::stod(same.out.substr(same.out.find_first_of("-0123456789"))) == doctest::Approx(0.0));
  const Run doubled = run("bdrate --anchor " + ws.p("a.csv") + " --test " + ws.p("b.csv"));
  CHECK(doubled.out.find("100.0000") != std::string::npos);

  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("bdrate --anchor " + ws.p("a.csv") + " --bogus 1").code == 1);
  CHECK(run("encode --input x --weights y --q 99 --out z").code == 1);
  CHECK(run("decode --in x --weights y --mode async --parallel 4 --queue 2 --out z").code == 1);
  CHECK(run("bdrate --anchor " + ws.p("missing.csv") + " --test " + ws.p("a.csv")).code == 2);
  CHECK(run("decode --in " + ws.p("a.csv") + " --weights " + ws.p("a.csv") + " --out " + ws.p("o.nvcr")).code == 2);
}
