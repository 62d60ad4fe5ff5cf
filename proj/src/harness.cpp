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

#include "costream/harness.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include "costream/random.hpp"

namespace costream {

namespace {

double max_abs(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

// Oldest frame of the oracle window for `step`, kept on the stride grid of a
// stream that started at frame 0.
std::int64_t window_start(const ReceptiveSummary& s, std::int64_t step) {
  const std::int64_t start = step - s.r_t + 1;
  return start <= 0 ? 0 : start / s.output_stride * s.output_stride;
}

NetworkSpec streaming_form(const NetworkSpec& net) {
  return net.continual ? net : convert_to_continual(net);
}

// Frame `j` of a traced or final clip output whose newest input frame is
// `step`, given the window started at input frame `start`.
std::optional<int> position_for(std::int64_t step, std::int64_t start, std::int64_t newest0,
                                std::int64_t jump, int length) {
  const std::int64_t rel = step - start - newest0;
  if (rel < 0 || rel % jump != 0) return std::nullopt;
  const std::int64_t j = rel / jump;
  if (j >= length) return std::nullopt;
  return static_cast<int>(j);
}

}  // namespace

std::vector<FrameTensor> synthetic_stream(const FrameShape& shape, int frames,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FrameTensor> out;
  out.reserve(frames);
  for (int i = 0; i < frames; ++i) out.push_back(random_frame(rng, shape));
  return out;
}

std::optional<FrameTensor> sliding_window_oracle(const NetworkSpec& net,
                                                 const std::vector<FrameTensor>& frames,
                                                 std::int64_t step,
                                                 std::vector<ClipTraceEntry>* trace) {
  const ReceptiveSummary s = analyze(net);
  const std::int64_t start = window_start(s, step);
  if (step - start < s.transient_len) return std::nullopt;
  const ClipTensor clip = clip_from_frames(
      std::span<const FrameTensor>(frames.data() + start, static_cast<std::size_t>(step - start + 1)));
  const ClipResult r = forward_clip(net, clip, TemporalPadding::causal, trace);
  const auto j = position_for(step, start, r.newest0, r.jump, r.output.time());
  if (!j) return std::nullopt;
  return r.output.frame(*j);
}

namespace {

// Replays the stream up to `step` with tracing and reports the first layer,
// in clip execution order, whose latest emission departs from the oracle.
Divergence locate_divergence(const NetworkSpec& co, const std::vector<FrameTensor>& frames,
                             std::int64_t step, double tolerance, double final_deviation) {
  std::map<std::string, std::pair<std::int64_t, FrameTensor>> latest;
  CoNetwork net(co);
  net.set_trace([&](const std::string& name, std::int64_t t, const FrameTensor& v) {
    latest[name] = {t, v};
  });
  for (std::int64_t t = 0; t <= step; ++t) net.step(frames[t]);

  std::vector<ClipTraceEntry> trace;
  sliding_window_oracle(co, frames, step, &trace);
  const ReceptiveSummary s = analyze(co);
  const std::int64_t start = window_start(s, step);
  for (const ClipTraceEntry& e : trace) {
    auto it = latest.find(e.name);
    if (it == latest.end()) continue;
    const auto j = position_for(it->second.first, start, e.newest0, e.jump, e.output.time());
    if (!j) continue;
    const double dev = max_abs(it->second.second.data(), e.output.frame(*j).data());
    if (dev > tolerance) return {step + 1, e.name, dev};
  }
  return {step + 1, "(output)", final_deviation};
}

}  // namespace

VerifyReport verify_stream(const NetworkSpec& net, const VerifyOptions& options) {
  const NetworkSpec co = streaming_form(net);
  VerifyReport rep;
  rep.summary = analyze(co);
  rep.frames = options.frames > 0 ? options.frames : static_cast<int>(rep.summary.r_t + 8);
  if (rep.frames < rep.summary.r_t) {
    throw Error("verification needs at least r_T = " + std::to_string(rep.summary.r_t) +
                " frames, got " + std::to_string(rep.frames));
  }
  const std::vector<FrameTensor> frames = synthetic_stream(co.input, rep.frames, options.seed);
  CoNetwork stream(co);
  bool ok = true;
  for (std::int64_t t = 0; t < rep.frames; ++t) {
    const StepOutput out = stream.step(frames[t]);
    const std::optional<FrameTensor> want = sliding_window_oracle(co, frames, t);
    if (!out.valid && !want) continue;
    double dev;
    if (out.valid != want.has_value()) {
      dev = INFINITY;
    } else {
      dev = max_abs(out.value->data(), want->data());
    }
    if (out.valid) {
      ++rep.valid_outputs;
      if (rep.first_valid_step < 0) rep.first_valid_step = t + 1;
    }
    rep.deviations.emplace_back(t + 1, dev);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    if (!(dev <= options.tolerance)) {
      ok = false;
      if (!rep.divergence) {
        rep.divergence = out.valid && want
                             ? locate_divergence(co, frames, t, options.tolerance, dev)
                             : Divergence{t + 1, "(emission step)", dev};
      }
    }
  }
  rep.passed = ok && rep.valid_outputs > 0;
  return rep;
}

TransientReport transient_trace(const NetworkSpec& net, const TransientOptions& options) {
  const NetworkSpec co = streaming_form(net);
  TransientReport rep;
  rep.summary = analyze(co);
  const int n = options.frames > 0 ? options.frames
                                   : static_cast<int>(rep.summary.transient_len + 8);
  std::vector<FrameTensor> frames = synthetic_stream(co.input, n, options.seed);

  // Stream as the oracle sees it.
  std::vector<FrameTensor> virtual_stream;
  std::int64_t offset = 0;
  if (options.init == InitScheme::replicate) {
    offset = rep.summary.r_t - 1;
    virtual_stream.assign(static_cast<std::size_t>(offset), frames.front());
  }
  virtual_stream.insert(virtual_stream.end(), frames.begin(), frames.end());

  CoNetwork stream = stream_init(co, options.init, &frames.front());
  for (int t = 0; t < n; ++t) {
    const StepOutput out = stream.step(frames[t]);
    TransientRow row;
    row.step = t + 1;
    row.valid = out.valid;
    if (out.valid) {
      if (rep.first_valid_step < 0) rep.first_valid_step = row.step;
      if (options.oracle) {
        const auto want = sliding_window_oracle(co, virtual_stream, t + offset);
        row.deviation = want ? max_abs(out.value->data(), want->data()) : INFINITY;
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string transient_csv(const TransientReport& rep) {
  std::ostringstream out;
  out << "step,valid,deviation\n";
  out.precision(9);
  for (const TransientRow& r : rep.rows) {
    out << r.step << ',' << (r.valid ? 1 : 0) << ',';
    if (r.deviation) out << *r.deviation;
    out << '\n';
  }
  return out.str();
}

std::string to_string(BenchMode mode) { return mode == BenchMode::clip ? "clip" : "continual"; }

namespace {

int default_window(const NetworkSpec& net) {
  int window = 0;
  for (const Layer& l : net.layers) {
    if (const auto* g = std::get_if<GlobalPoolLayer>(&l.op)) window = g->temporal_kernel;
  }
  return window > 0 ? window : static_cast<int>(analyze(net).r_t);
}

// Runs `steps` predictions on one stream and returns nothing; timing is done
// by the caller around all streams.
struct ClipWorker {
  const NetworkSpec* net;
  std::vector<FrameTensor> pool;
  int window;
  std::int64_t cursor = 0;

  void run(int steps) {
    const FrameShape s = net->input;
    const std::size_t plane = s.plane();
    for (int i = 0; i < steps; ++i) {
      // Reassemble the trailing window from the frame history.
      ClipTensor clip(s.channels, window, s.height, s.width);
      for (int t = 0; t < window; ++t) {
        const FrameTensor& f = pool[(cursor + t) % pool.size()];
        for (int c = 0; c < s.channels; ++c) {
          std::copy(f.channel(c), f.channel(c) + plane, clip.plane_ptr(c, t));
        }
      }
      ++cursor;
      const ClipResult r = forward_clip(*net, clip, TemporalPadding::declared);
      sink += r.output.data()[0];
    }
  }
  float sink = 0.0f;
};

struct StreamWorker {
  CoNetwork net;
  std::vector<FrameTensor> pool;
  std::int64_t cursor = 0;

  void run(int steps) {
    for (int i = 0; i < steps; ++i) {
      const StepOutput out = net.step(pool[cursor++ % pool.size()]);
      if (out.valid) sink += out.value->data()[0];
    }
  }
  float sink = 0.0f;
};

template <typename Worker>
double timed(std::vector<Worker>& workers, int steps) {
  const auto t0 = std::chrono::steady_clock::now();
  if (workers.size() == 1) {
    workers[0].run(steps);
  } else {
    std::vector<std::thread> threads;
    for (auto& w : workers) threads.emplace_back([&w, steps] { w.run(steps); });
    for (auto& t : threads) t.join();
  }
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

BenchResult bench(const NetworkSpec& net, const BenchOptions& o) {
  if (o.streams < 1 || o.repetitions < 1 || o.warmup < 0 || o.steps < 1) {
    throw Error("streams, repetitions and steps must be >= 1 and warm-up >= 0");
  }
  BenchResult res;
  res.mode = o.mode;
  res.streams = o.streams;
  res.repetitions = o.repetitions;
  res.warmup = o.warmup;
  validate(net, true);

  auto measure = [&](auto& workers) {
    for (int i = 0; i < o.warmup; ++i) timed(workers, o.steps);
    for (int i = 0; i < o.repetitions; ++i) {
      const double secs = timed(workers, o.steps);
      res.samples.push_back(static_cast<double>(o.steps) * o.streams / secs);
    }
  };

  if (o.mode == BenchMode::clip) {
    res.window = o.window > 0 ? o.window : default_window(net);
    std::vector<ClipWorker> workers;
    for (int s = 0; s < o.streams; ++s) {
      workers.push_back({&net, synthetic_stream(net.input, res.window + 7, o.seed + s),
                         res.window});
    }
    measure(workers);
  } else {
    const NetworkSpec co = streaming_form(net);
    res.window = o.window;
    std::vector<StreamWorker> workers;
    for (int s = 0; s < o.streams; ++s) {
      workers.push_back({CoNetwork(co), synthetic_stream(co.input, 23, o.seed + s)});
    }
    measure(workers);
  }

  double sum = 0.0;
  for (double v : res.samples) sum += v;
  res.mean = sum / res.samples.size();
  double var = 0.0;
  for (double v : res.samples) var += (v - res.mean) * (v - res.mean);
  res.stddev = res.samples.size() > 1 ? std::sqrt(var / (res.samples.size() - 1)) : 0.0;
  return res;
}

}  // namespace costream
