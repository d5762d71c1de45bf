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

#include "rtvc/codec.hpp"

#include <algorithm>
#include <exception>
#include <memory>
#include <sstream>
#include <thread>

#include "rtvc/frame_reconstructor.hpp"
#include "rtvc/latent_compressor.hpp"

namespace rtvc {
namespace {

constexpr char kMagic[5] = "DVRT";

TensorF with_precision(TensorF t, PrecisionMode precision) {
  t.set_precision(precision);
  return t;
}

void check_header(const VideoHeader& h, const ModelConfig& cfg) {
  if (h.frame_count == 0) throw DataError("container: no frames");
  if (h.intra_period == 0) throw DataError("container: intra period must be positive");
  if (h.unshuffle != cfg.unshuffle) {
    throw DataError("container: unshuffle factor " + std::to_string(h.unshuffle) +
                    " does not match the model's " + std::to_string(cfg.unshuffle));
  }
  check_quality(h.quality);
  validate_geometry(cfg, static_cast<int>(h.height), static_cast<int>(h.width), h.shift_p);
}

// In-loop state shared by encoder and decoders: the previous reconstructed
// latent and the context chain derived from it.
class LatentLoop {
 public:
  LatentLoop(const Model& model, const VideoHeader& header)
      : model_(model),
        header_(header),
        h_(static_cast<int>(header.height) / model.config.unshuffle),
        w_(static_cast<int>(header.width) / model.config.unshuffle) {}

  TemporalContexts<TensorF> contexts(std::size_t t) const {
    if (is_intra(t, header_.intra_period)) {
      return zero_contexts(model_.config, h_, w_, kLatentPrecision);
    }
    return extract_contexts(previous_, model_.weights);
  }

  void advance(TensorF latent) { previous_ = std::move(latent); }

 private:
  const Model& model_;
  const VideoHeader& header_;
  int h_;
  int w_;
  TensorF previous_;
};

TensorF decode_record(const EncodedVideo& video, std::size_t t, LatentLoop& loop,
                      const Model& model, TensorF* ctx_mix) {
  const FrameRecord& record = video.records[t];
  const bool intra = is_intra(t, video.header.intra_period);
  if ((record.type == FrameType::Intra) != intra) {
    throw DataError("container: frame " + std::to_string(t) + " has the wrong frame type");
  }
  const TemporalContexts<TensorF> ctx = loop.contexts(t);
  TensorF latent = decode_latent(Bitstream{record.payload}, ctx, video.header.quality, model.weights);
  loop.advance(latent);
  if (ctx_mix) *ctx_mix = ctx.mix;
  return latent;
}

template <typename State>
void init_shift_state(State& state, const Model& model, const VideoHeader& h) {
  const int s = model.config.unshuffle;
  register_shift_layers(state, model.config, static_cast<int>(h.height) / s,
                        static_cast<int>(h.width) / s, kReconstructionPrecision);
}

struct LoopOutput {
  std::size_t index;
  TensorF latent;   // BF16Emu
  TensorF ctx_mix;  // BF16Emu
};

}  // namespace

std::vector<std::uint8_t> serialize_video(const EncodedVideo& video) {
  const VideoHeader& h = video.header;
  if (video.records.size() != h.frame_count) {
    throw DataError("container: header frame count does not match records");
  }
  ByteWriter w;
  w.text(kMagic);
  w.u16(h.version);
  w.u32(h.width);
  w.u32(h.height);
  w.u32(h.frame_count);
  w.u16(h.intra_period);
  w.u8(h.quality);
  w.u8(h.unshuffle);
  w.u8(h.shift_p);
  for (const FrameRecord& r : video.records) {
    w.u8(static_cast<std::uint8_t>(r.type));
    w.u32(static_cast<std::uint32_t>(r.payload.size()));
    w.bytes(r.payload);
  }
  return std::move(w.data());
}

EncodedVideo parse_video(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "container");
  r.expect_magic(kMagic);
  EncodedVideo video;
  VideoHeader& h = video.header;
  h.version = r.u16();
  if (h.version != kContainerVersion) {
    throw DataError("container: unsupported version " + std::to_string(h.version));
  }
  h.width = r.u32();
  h.height = r.u32();
  h.frame_count = r.u32();
  h.intra_period = r.u16();
  h.quality = r.u8();
  h.unshuffle = r.u8();
  h.shift_p = r.u8();
  if (h.intra_period == 0) throw DataError("container: intra period must be positive");
  for (std::uint32_t t = 0; t < h.frame_count; ++t) {
    FrameRecord rec;
    const std::uint8_t type = r.u8();
    if (type > 1) throw DataError("container: unknown frame type " + std::to_string(type));
    rec.type = static_cast<FrameType>(type);
    const std::uint32_t len = r.u32();
    const auto payload = r.bytes(len);
    rec.payload.assign(payload.begin(), payload.end());
    video.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) throw DataError("container: trailing bytes after last record");
  return video;
}

EncodeResult encode_video_with_latents(std::span<const TensorF> frames, const EncoderConfig& cfg,
                                       const Model& model) {
  if (frames.empty()) throw DataError("encode: no frames");
  if (cfg.intra_period < 1 || cfg.intra_period > 0xFFFF) {
    throw std::invalid_argument("encode: intra period out of range");
  }
  check_quality(cfg.quality);
  const Shape& first = frames.front().shape();
  if (first.n != 1 || first.c != 3) throw ShapeError("encode: frames must be (1,3,H,W), got " + first.str());
  for (const TensorF& f : frames) {
    if (f.shape() != first) throw ShapeError("encode: frame dims differ");
  }
  if (cfg.shift_p < 1 || cfg.shift_p > 0xFF) throw ShapeError("encode: shift P out of range");

  EncodeResult out;
  VideoHeader& h = out.video.header;
  h.width = static_cast<std::uint32_t>(first.w);
  h.height = static_cast<std::uint32_t>(first.h);
  h.frame_count = static_cast<std::uint32_t>(frames.size());
  h.intra_period = static_cast<std::uint16_t>(cfg.intra_period);
  h.quality = static_cast<std::uint8_t>(cfg.quality);
  h.unshuffle = static_cast<std::uint8_t>(model.config.unshuffle);
  h.shift_p = static_cast<std::uint8_t>(cfg.shift_p);
  check_header(h, model.config);

  LatentLoop loop(model, h);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const TensorF raw = with_precision(to_latent(frames[t], model.config.unshuffle), kLatentPrecision);
    LatentEncoding enc = encode_latent(raw, loop.contexts(t), cfg.quality, model.weights);
    out.video.records.push_back(
        {is_intra(t, cfg.intra_period) ? FrameType::Intra : FrameType::Predicted,
         std::move(enc.bits.bytes)});
    loop.advance(enc.latent);
    out.latents.push_back(std::move(enc.latent));
  }
  return out;
}

EncodedVideo encode_video(std::span<const TensorF> frames, const EncoderConfig& cfg,
                          const Model& model) {
  return encode_video_with_latents(frames, cfg, model).video;
}

std::vector<TensorF> decode_latents(const EncodedVideo& video, const Model& model) {
  check_header(video.header, model.config);
  if (video.records.size() != video.header.frame_count) {
    throw DataError("container: header frame count does not match records");
  }
  LatentLoop loop(model, video.header);
  std::vector<TensorF> out;
  for (std::size_t t = 0; t < video.records.size(); ++t) {
    out.push_back(decode_record(video, t, loop, model, nullptr));
  }
  return out;
}

DecodeResult decode_video_sync_with_latents(const EncodedVideo& video, const Model& model) {
  check_header(video.header, model.config);
  if (video.records.size() != video.header.frame_count) {
    throw DataError("container: header frame count does not match records");
  }
  LatentLoop loop(model, video.header);
  ShiftState<TensorF> shift(ShiftConfig{video.header.shift_p});
  init_shift_state(shift, model, video.header);

  DecodeResult out;
  for (std::size_t t = 0; t < video.records.size(); ++t) {
    TensorF ctx_mix;
    TensorF latent = decode_record(video, t, loop, model, &ctx_mix);
    if (is_intra(t, video.header.intra_period)) shift.reset();
    const TensorF enhanced =
        enhance(with_precision(latent, kReconstructionPrecision),
                with_precision(ctx_mix, kReconstructionPrecision), shift, model.weights, model.config);
    out.frames.push_back(reconstruct(enhanced, model.weights, model.config));
    out.latents.push_back(std::move(latent));
  }
  return out;
}

std::vector<TensorF> decode_video_sync(const EncodedVideo& video, const Model& model) {
  return decode_video_sync_with_latents(video, model).frames;
}

std::string DecodeStats::log_line() const {
  std::ostringstream os;
  os << "async N=" << batch << " Q=" << queue_capacity << " frames=" << emitted.size()
     << " batches=" << batch_sizes.size() << " latency_frames=" << latency_frames;
  return os.str();
}

std::vector<TensorF> decode_video_async(const EncodedVideo& video, const Model& model,
                                        const PipelineConfig& cfg, DecodeStats* stats) {
  if (cfg.batch < 1) throw std::invalid_argument("pipeline: N must be >= 1");
  if (cfg.capacity() < cfg.batch) throw std::invalid_argument("pipeline: queue capacity must be >= N");
  check_header(video.header, model.config);
  if (video.records.size() != video.header.frame_count) {
    throw DataError("container: header frame count does not match records");
  }

  const std::size_t count = video.records.size();
  BoundedQueue<LoopOutput> queue(static_cast<std::size_t>(cfg.capacity()));
  std::vector<TensorF> frames(count);
  DecodeStats local;
  local.batch = cfg.batch;
  local.queue_capacity = cfg.capacity();
  std::exception_ptr latent_error;
  std::exception_ptr recon_error;

  // Worker A: in-loop latent decoding. Owns the loop state exclusively.
  std::thread latent_worker([&] {
    try {
      LatentLoop loop(model, video.header);
      for (std::size_t t = 0; t < count; ++t) {
        TensorF ctx_mix;
        const TensorF latent = decode_record(video, t, loop, model, &ctx_mix);
        if (!queue.push({t, with_precision(latent, kReconstructionPrecision),
                         with_precision(ctx_mix, kReconstructionPrecision)})) {
          return;
        }
      }
      queue.close();
    } catch (...) {
      latent_error = std::current_exception();
      queue.abort();
    }
  });

  // Worker B: out-of-loop batch reconstruction.
  std::thread recon_worker([&] {
    try {
      BatchCarry carry(ShiftConfig{video.header.shift_p});
      init_shift_state(carry, model, video.header);
      std::size_t expected = 0;
      while (true) {
        std::vector<LoopOutput> batch;
        while (static_cast<int>(batch.size()) < cfg.batch) {
          std::optional<LoopOutput> item = queue.pop();
          if (!item) break;
          if (item->index != expected + batch.size()) throw DataError("pipeline: frame order violated");
          batch.push_back(std::move(*item));
        }
        if (batch.empty()) break;
        if (cfg.reconstruction_delay.count() > 0) std::this_thread::sleep_for(cfg.reconstruction_delay);

        const std::size_t n = batch.size();
        std::vector<TensorF> latents, mixes;
        auto restart = std::make_unique<bool[]>(n);
        for (std::size_t i = 0; i < n; ++i) {
          latents.push_back(std::move(batch[i].latent));
          mixes.push_back(std::move(batch[i].ctx_mix));
          restart[i] = is_intra(batch[i].index, video.header.intra_period);
        }
        const TensorF enhanced =
            enhance_batch(concat_batch<float>(latents), concat_batch<float>(mixes), carry,
                          std::span<const bool>(restart.get(), n), model.weights, model.config);
        if (local.batch_sizes.empty()) local.latency_frames = static_cast<int>(n) - 1;
        local.batch_sizes.push_back(static_cast<int>(n));
        for (std::size_t i = 0; i < n; ++i) {
          frames[expected + i] =
              reconstruct(slice_batch(enhanced, static_cast<int>(i)), model.weights, model.config);
          local.emitted.push_back(static_cast<int>(expected + i));
        }
        expected += n;
      }
      if (expected != count && !latent_error) throw DataError("pipeline: reconstruction ended early");
    } catch (...) {
      recon_error = std::current_exception();
      queue.abort();
    }
  });

  latent_worker.join();
  recon_worker.join();
  if (latent_error) std::rethrow_exception(latent_error);
  if (recon_error) std::rethrow_exception(recon_error);
  if (stats) *stats = std::move(local);
  return frames;
}

std::string BenchRow::str() const {
  std::ostringstream os;
  os << "N=" << (batch ? std::to_string(*batch) : std::string("sync")) << " fps=" << fps
     << " latency_frames=" << latency_frames;
  return os.str();
}

std::vector<BenchRow> throughput_bench(const EncodedVideo& video, const Model& model,
                                       std::span<const int> batches, int warmup, int measured) {
  if (measured < 1) throw std::invalid_argument("bench: need at least one measured run");
  const double frames = static_cast<double>(video.header.frame_count);
  auto median_fps = [&](auto&& run) {
    for (int i = 0; i < warmup; ++i) run();
    std::vector<double> fps;
    for (int i = 0; i < measured; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      fps.push_back(frames / std::max(dt.count(), 1e-9));
    }
    std::nth_element(fps.begin(), fps.begin() + fps.size() / 2, fps.end());
    return fps[fps.size() / 2];
  };

  std::vector<BenchRow> rows;
  rows.push_back({std::nullopt, median_fps([&] { decode_video_sync(video, model); }), 0});
  for (int n : batches) {
    DecodeStats stats;
    const double fps = median_fps([&] { decode_video_async(video, model, {n, 0, {}}, &stats); });
    rows.push_back({n, fps, stats.latency_frames});
  }
  return rows;
}

}  // namespace rtvc
