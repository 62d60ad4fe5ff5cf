/* Copyright 2026 The costream Authors. All Rights Reserved.

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

#ifndef COSTREAM_HARNESS_HPP_
#define COSTREAM_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "costream/network.hpp"

namespace costream {

// A reproducible stream of uniform noise frames in [-1, 1).
std::vector<FrameTensor> synthetic_stream(const FrameShape& shape, int frames, std::uint64_t seed);

// Reference for the output a stream emits at `step`: causal clip inference on
// the trailing r_T frames, taking the output whose newest frame is `step`.
// Returns nullopt when no clip output ends at that frame.
std::optional<FrameTensor> sliding_window_oracle(const NetworkSpec& net,
                                                 const std::vector<FrameTensor>& frames,
                                                 std::int64_t step,
                                                 std::vector<ClipTraceEntry>* trace = nullptr);

struct Divergence {
  std::int64_t step = 0;
  std::string layer;
  double deviation = 0.0;
};

struct VerifyOptions {
  int frames = 0;  // 0 selects r_T + 8
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

struct VerifyReport {
  ReceptiveSummary summary;
  int frames = 0;
  std::int64_t first_valid_step = -1;  // 1-based, -1 when nothing was valid
  int valid_outputs = 0;
  double max_deviation = 0.0;
  std::vector<std::pair<std::int64_t, double>> deviations;  // 1-based step, deviation
  std::optional<Divergence> divergence;
  bool passed = false;
};

// Streams seeded noise through the continual form of `net` and compares every
// valid output with the sliding-window oracle. Weights must be populated.
VerifyReport verify_stream(const NetworkSpec& net, const VerifyOptions& options);

struct TransientOptions {
  InitScheme init = InitScheme::zeros;
  int frames = 0;  // 0 selects transient_len + 8
  std::uint64_t seed = 0;
  bool oracle = true;
};

struct TransientRow {
  std::int64_t step = 0;  // 1-based
  bool valid = false;
  std::optional<double> deviation;
};

struct TransientReport {
  ReceptiveSummary summary;
  std::vector<TransientRow> rows;
  std::int64_t first_valid_step = -1;
};

// With replicate initialisation the oracle sees the seed frame repeated
// r_T - 1 times in front of the stream.
TransientReport transient_trace(const NetworkSpec& net, const TransientOptions& options);
std::string transient_csv(const TransientReport& report);

enum class BenchMode { clip, continual };

struct BenchOptions {
  BenchMode mode = BenchMode::continual;
  int streams = 1;
  int repetitions = 5;
  int warmup = 1;
  int steps = 32;  // predictions per stream per repetition
  int window = 0;  // clip length for clip mode; 0 selects the global pool kernel
  std::uint64_t seed = 0;
};

struct BenchResult {
  BenchMode mode = BenchMode::continual;
  int streams = 1;
  int repetitions = 1;
  int warmup = 0;
  int window = 0;
  double mean = 0.0;  // predictions per second
  double stddev = 0.0;
  std::vector<double> samples;
};

// Clip mode reassembles the trailing window into a fresh clip every step and
// runs the clip-wise network; continual mode steps the streaming network.
BenchResult bench(const NetworkSpec& net, const BenchOptions& options);

std::string to_string(BenchMode mode);

}  // namespace costream

#endif  // COSTREAM_HARNESS_HPP_
