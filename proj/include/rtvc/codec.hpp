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

// Encoder loop, the sequential reference decoder and the two-worker
// asynchronous decoder. The latent path runs in FP16Emu, the reconstruction
// path in BF16Emu, in every mode, so async output can be compared
// byte-for-byte with sync output.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtvc/model.hpp"

namespace rtvc {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr PrecisionMode kLatentPrecision = PrecisionMode::FP16Emu;
inline constexpr PrecisionMode kReconstructionPrecision = PrecisionMode::BF16Emu;

enum class FrameType : std::uint8_t { Intra = 0, Predicted = 1 };

struct VideoHeader {
  std::uint16_t version = kContainerVersion;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frame_count = 0;
  std::uint16_t intra_period = 32;
  std::uint8_t quality = 0;
  std::uint8_t unshuffle = 8;
  std::uint8_t shift_p = 8;

  bool operator==(const VideoHeader&) const = default;
};

struct FrameRecord {
  FrameType type = FrameType::Intra;
  std::vector<std::uint8_t> payload;

  bool operator==(const FrameRecord&) const = default;
};

struct EncodedVideo {
  VideoHeader header;
  std::vector<FrameRecord> records;

  bool operator==(const EncodedVideo&) const = default;
};

inline bool is_intra(std::size_t t, int intra_period) {
  return t % static_cast<std::size_t>(intra_period) == 0;
}

// "DVRT" layout, little-endian.
std::vector<std::uint8_t> serialize_video(const EncodedVideo& video);
EncodedVideo parse_video(std::span<const std::uint8_t> bytes);

struct EncoderConfig {
  int quality = 8;
  int intra_period = 32;
  int shift_p = 8;
};

struct EncodeResult {
  EncodedVideo video;
  // Encoder-side reconstructed latents, one per frame.
  std::vector<TensorF> latents;
};

// Frames are (1, 3, H, W) in [0, 1]. Never runs the frame reconstructor.
EncodeResult encode_video_with_latents(std::span<const TensorF> frames, const EncoderConfig& cfg,
                                       const Model& model);
EncodedVideo encode_video(std::span<const TensorF> frames, const EncoderConfig& cfg,
                          const Model& model);

struct DecodeResult {
  std::vector<TensorF> frames;
  std::vector<TensorF> latents;  // decoder-side reconstructed latents
};

// The in-loop part of decoding only: reconstructed latents, no frames.
std::vector<TensorF> decode_latents(const EncodedVideo& video, const Model& model);

DecodeResult decode_video_sync_with_latents(const EncodedVideo& video, const Model& model);
std::vector<TensorF> decode_video_sync(const EncodedVideo& video, const Model& model);

struct PipelineConfig {
  int batch = 4;               // N
  int queue_capacity = 0;      // Q; 0 selects 2N
  std::chrono::milliseconds reconstruction_delay{0};  // per batch, for liveness tests

  int capacity() const { return queue_capacity == 0 ? 2 * batch : queue_capacity; }
};

struct DecodeStats {
  int batch = 0;
  int queue_capacity = 0;
  // Latents that had to be available before frame 0 was emitted, minus one.
  int latency_frames = 0;
  std::vector<int> batch_sizes;
  std::vector<int> emitted;  // frame indices in emission order

  std::string log_line() const;
};

std::vector<TensorF> decode_video_async(const EncodedVideo& video, const Model& model,
                                        const PipelineConfig& cfg, DecodeStats* stats = nullptr);

struct BenchRow {
  std::optional<int> batch;  // empty for the sync baseline
  double fps = 0.0;
  int latency_frames = 0;

  std::string str() const;
};

std::vector<BenchRow> throughput_bench(const EncodedVideo& video, const Model& model,
                                       std::span<const int> batches, int warmup = 1,
                                       int measured = 3);

// Blocking FIFO with a capacity bound. close() lets the consumer drain;
// abort() wakes everyone and discards the contents.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("BoundedQueue: capacity must be positive");
  }

  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return aborted_ || items_.size() < capacity_; });
    if (aborted_ || closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return aborted_ || closed_ || !items_.empty(); });
    if (aborted_ || items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    items_.clear();
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
  bool aborted_ = false;
};

}  // namespace rtvc
