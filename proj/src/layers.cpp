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

#include "costream/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace costream {

void PoolSpec::validate() const {
  temporal.validate("temporal");
  height.validate("height");
  width.validate("width");
  if (temporal.dilation != 1) throw Error("temporal pooling dilation must be 1");
  if (temporal.padding > temporal.kernel - 1) {
    throw Error("temporal pooling padding exceeds kernel size - 1");
  }
}

FrameShape PoolSpec::output_frame_shape(const FrameShape& in) const {
  return {in.channels, output_size(in.height, height), output_size(in.width, width)};
}

std::size_t CoPoolState::floats() const {
  std::size_t n = 0;
  for (const auto& f : mem) n += f.size();
  return n;
}

std::size_t DelayLineState::floats() const {
  std::size_t n = 0;
  for (const auto& f : queue) n += f.size();
  return n;
}

float activate(Activation fn, float x) {
  switch (fn) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return x > 0.0f ? x : 0.0f;
    case Activation::swish:
      return x / (1.0f + std::exp(-x));
    case Activation::sigmoid:
      return 1.0f / (1.0f + std::exp(-x));
  }
  return x;
}

void activate_inplace(Activation fn, std::span<float> xs) {
  if (fn == Activation::identity) return;
  for (float& x : xs) x = activate(fn, x);
}

std::string to_string(Activation fn) {
  switch (fn) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::swish:
      return "swish";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "identity";
}

std::string to_string(PoolKind kind) { return kind == PoolKind::avg ? "avg" : "max"; }

void NormSpec::allocate() {
  scale.assign(channels, 1.0f);
  shift.assign(channels, 0.0f);
  mean.assign(channels, 0.0f);
  var.assign(channels, 1.0f);
}

void NormSpec::validate() const {
  const auto n = static_cast<std::size_t>(channels);
  if (channels < 1 || scale.size() != n || shift.size() != n || mean.size() != n ||
      var.size() != n) {
    throw Error("normalisation parameters do not match channel count");
  }
  for (float v : var) {
    if (!(v >= 0.0f)) throw Error("normalisation running variance must be >= 0");
  }
}

int SeSpec::hidden() const { return std::max(1, channels / reduction); }

void SeSpec::allocate() {
  const auto c = static_cast<std::size_t>(channels);
  const auto h = static_cast<std::size_t>(hidden());
  w1.assign(h * c, 0.0f);
  b1.assign(h, 0.0f);
  w2.assign(c * h, 0.0f);
  b2.assign(c, 0.0f);
}

void SeSpec::validate() const {
  if (channels < 1 || reduction < 1) throw Error("SE channels and reduction must be >= 1");
  const auto c = static_cast<std::size_t>(channels);
  const auto h = static_cast<std::size_t>(hidden());
  if (w1.size() != h * c || b1.size() != h || w2.size() != c * h || b2.size() != c) {
    throw Error("SE parameters do not match channel count");
  }
}

namespace {

// Pools one (h, w) plane into `out` (n_h, n_w).
void pool_plane(const float* in, int in_h, int in_w, const PoolSpec& spec, float* out,
                int out_h, int out_w) {
  const DimSpec& ph = spec.height;
  const DimSpec& pw = spec.width;
  const float inv = 1.0f / static_cast<float>(ph.kernel * pw.kernel);
  for (int oh = 0; oh < out_h; ++oh) {
    for (int ow = 0; ow < out_w; ++ow) {
      float acc = spec.kind == PoolKind::avg ? 0.0f : -std::numeric_limits<float>::infinity();
      for (int kh = 0; kh < ph.kernel; ++kh) {
        const int ih = oh * ph.stride + kh * ph.dilation - ph.padding;
        if (ih < 0 || ih >= in_h) continue;
        for (int kw = 0; kw < pw.kernel; ++kw) {
          const int iw = ow * pw.stride + kw * pw.dilation - pw.padding;
          if (iw < 0 || iw >= in_w) continue;
          const float v = in[static_cast<std::size_t>(ih) * in_w + iw];
          acc = spec.kind == PoolKind::avg ? acc + v : std::max(acc, v);
        }
      }
      out[static_cast<std::size_t>(oh) * out_w + ow] =
          spec.kind == PoolKind::avg ? acc * inv : acc;
    }
  }
}

}  // namespace

FrameTensor pool2d(const FrameTensor& frame, const PoolSpec& spec) {
  const FrameShape os = spec.output_frame_shape(frame.shape());
  FrameTensor out(os);
  for (int c = 0; c < os.channels; ++c) {
    pool_plane(frame.channel(c), frame.height(), frame.width(), spec, out.channel(c),
               os.height, os.width);
  }
  return out;
}

ClipTensor pool3d_regular(const ClipTensor& clip, const PoolSpec& spec, int pad_front,
                          int pad_back) {
  spec.validate();
  const FrameShape os = spec.output_frame_shape(clip.frame_shape());
  const int nt = output_size(clip.time(), spec.temporal, pad_front, pad_back);
  ClipTensor out(os.channels, nt, os.height, os.width);
  const DimSpec& t = spec.temporal;
  const DimSpec& ph = spec.height;
  const DimSpec& pw = spec.width;
  const float inv = 1.0f / static_cast<float>(t.kernel * ph.kernel * pw.kernel);
  for (int c = 0; c < os.channels; ++c) {
    for (int ot = 0; ot < nt; ++ot) {
      for (int oh = 0; oh < os.height; ++oh) {
        for (int ow = 0; ow < os.width; ++ow) {
          float acc =
              spec.kind == PoolKind::avg ? 0.0f : -std::numeric_limits<float>::infinity();
          for (int kt = 0; kt < t.kernel; ++kt) {
            const int it = ot * t.stride + kt - pad_front;
            const bool pad_frame = it < 0 || it >= clip.time();
            for (int kh = 0; kh < ph.kernel; ++kh) {
              const int ih = oh * ph.stride + kh * ph.dilation - ph.padding;
              if (ih < 0 || ih >= clip.height()) continue;
              for (int kw = 0; kw < pw.kernel; ++kw) {
                const int iw = ow * pw.stride + kw * pw.dilation - pw.padding;
                if (iw < 0 || iw >= clip.width()) continue;
                const float v = pad_frame ? 0.0f : clip.at(c, it, ih, iw);
                acc = spec.kind == PoolKind::avg ? acc + v : std::max(acc, v);
              }
            }
          }
          out.at(c, ot, oh, ow) = spec.kind == PoolKind::avg ? acc * inv : acc;
        }
      }
    }
  }
  return out;
}

int copool_delay(const PoolSpec& spec) {
  return spec.temporal.kernel - spec.temporal.padding - 1;
}

CoPoolState copool_init(const PoolSpec& spec, const FrameShape& input) {
  spec.validate();
  CoPoolState state;
  state.mem.assign(spec.temporal.kernel - 1, FrameTensor(spec.output_frame_shape(input)));
  return state;
}

StepOutput copool_step(const FrameTensor& frame, CoPoolState& state, const PoolSpec& spec) {
  FrameTensor pooled = pool2d(frame, spec);
  const int k = spec.temporal.kernel;
  const std::size_t m = state.mem.size();
  if (m != static_cast<std::size_t>(k - 1)) {
    throw Error("pooling state length does not match the temporal kernel");
  }
  if (m > 0 && state.mem.front().shape() != pooled.shape()) {
    throw Error("pooling state shape does not match frame");
  }
  const int delay = copool_delay(spec);
  const std::int64_t now = state.seen;

  StepOutput result;
  if (on_emission_grid(now, delay, spec.temporal.stride)) {
    FrameTensor out(pooled.shape());
    auto o = out.data();
    const auto p = pooled.data();
    if (spec.kind == PoolKind::avg) {
      // Oldest first, newest last.
      for (std::size_t j = 0; j < m; ++j) {
        const auto src = state.mem[(state.index + j) % m].data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += src[i];
      }
      const float inv = 1.0f / static_cast<float>(k);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = (o[i] + p[i]) * inv;
    } else {
      std::copy(p.begin(), p.end(), o.begin());
      for (std::size_t j = 0; j < m; ++j) {
        const auto src = state.mem[(state.index + j) % m].data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(o[i], src[i]);
      }
    }
    result.valid = now >= delay;
    result.value = std::move(out);
  }
  if (m > 0) {
    state.mem[state.index] = std::move(pooled);
    state.index = (state.index + 1) % m;
  }
  ++state.seen;
  return result;
}

DelayLineState delay_init(int delay, const FrameShape& shape) {
  if (delay < 0) throw Error("delay must be >= 0");
  DelayLineState state;
  state.delay = delay;
  state.queue.assign(delay, FrameTensor(shape));
  return state;
}

StepOutput delay_step(const FrameTensor& frame, DelayLineState& state) {
  StepOutput result;
  if (state.delay == 0) {
    result.value = frame;
    result.valid = true;
  } else {
    FrameTensor& slot = state.queue[state.index];
    if (slot.shape() != frame.shape()) throw Error("delay line frame shape mismatch");
    result.value = std::exchange(slot, frame);
    result.valid = state.seen >= state.delay;
    state.index = (state.index + 1) % state.queue.size();
  }
  ++state.seen;
  return result;
}

namespace {

// Channel gate from per-channel means.
std::vector<float> se_gate(const std::vector<float>& means, const SeSpec& spec) {
  const int c = spec.channels;
  const int h = spec.hidden();
  std::vector<float> hidden(h);
  for (int j = 0; j < h; ++j) {
    float acc = spec.b1[j];
    for (int i = 0; i < c; ++i) acc += spec.w1[static_cast<std::size_t>(j) * c + i] * means[i];
    hidden[j] = activate(spec.activation, acc);
  }
  std::vector<float> gate(c);
  for (int i = 0; i < c; ++i) {
    float acc = spec.b2[i];
    for (int j = 0; j < h; ++j) acc += spec.w2[static_cast<std::size_t>(i) * h + j] * hidden[j];
    gate[i] = activate(Activation::sigmoid, acc);
  }
  return gate;
}

}  // namespace

FrameTensor se_block_step(const FrameTensor& frame, const SeSpec& spec) {
  if (frame.channels() != spec.channels) throw Error("SE channel mismatch");
  const std::size_t plane = frame.shape().plane();
  std::vector<float> means(spec.channels);
  for (int c = 0; c < spec.channels; ++c) {
    const float* x = frame.channel(c);
    float acc = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) acc += x[i];
    means[c] = acc / static_cast<float>(plane);
  }
  const std::vector<float> gate = se_gate(means, spec);
  FrameTensor out = frame;
  for (int c = 0; c < spec.channels; ++c) {
    float* o = out.channel(c);
    for (std::size_t i = 0; i < plane; ++i) o[i] *= gate[c];
  }
  return out;
}

ClipTensor se_block_clip(const ClipTensor& clip, const SeSpec& spec) {
  if (clip.channels() != spec.channels) throw Error("SE channel mismatch");
  if (!spec.temporal_pool) {
    ClipTensor out(clip.channels(), clip.time(), clip.height(), clip.width());
    for (int t = 0; t < clip.time(); ++t) out.set_frame(t, se_block_step(clip.frame(t), spec));
    return out;
  }
  const std::size_t n = clip.channel_stride();
  std::vector<float> means(spec.channels);
  for (int c = 0; c < spec.channels; ++c) {
    const float* x = clip.plane_ptr(c, 0);
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    means[c] = acc / static_cast<float>(n);
  }
  const std::vector<float> gate = se_gate(means, spec);
  ClipTensor out = clip;
  for (int c = 0; c < spec.channels; ++c) {
    float* o = out.plane_ptr(c, 0);
    for (std::size_t i = 0; i < n; ++i) o[i] *= gate[c];
  }
  return out;
}

FrameTensor norm_infer(const FrameTensor& frame, const NormSpec& spec) {
  if (frame.channels() != spec.channels) throw Error("normalisation channel mismatch");
  FrameTensor out = frame;
  const std::size_t plane = frame.shape().plane();
  for (int c = 0; c < spec.channels; ++c) {
    const float inv = 1.0f / std::sqrt(spec.var[c] + spec.epsilon);
    float* o = out.channel(c);
    for (std::size_t i = 0; i < plane; ++i) {
      o[i] = (o[i] - spec.mean[c]) * inv * spec.scale[c] + spec.shift[c];
    }
  }
  return out;
}

ClipTensor norm_infer(const ClipTensor& clip, const NormSpec& spec) {
  if (clip.channels() != spec.channels) throw Error("normalisation channel mismatch");
  ClipTensor out = clip;
  const std::size_t n = clip.channel_stride();
  for (int c = 0; c < spec.channels; ++c) {
    const float inv = 1.0f / std::sqrt(spec.var[c] + spec.epsilon);
    float* o = out.plane_ptr(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = (o[i] - spec.mean[c]) * inv * spec.scale[c] + spec.shift[c];
    }
  }
  return out;
}

double momentum_adjust(double mom_clip, int timesteps) {
  if (!(mom_clip > 0.0 && mom_clip <= 1.0)) throw Error("momentum must lie in (0, 1]");
  if (timesteps < 1) throw Error("timesteps must be >= 1");
  return 2.0 / (1.0 + timesteps * (2.0 / mom_clip - 1.0));
}

}  // namespace costream
