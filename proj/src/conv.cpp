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

#include "costream/conv.hpp"

#include <algorithm>

namespace costream {

std::size_t ConvSpec::weight_count() const {
  return static_cast<std::size_t>(out_channels) * (in_channels / groups) *
         temporal.kernel * height.kernel * width.kernel;
}

void ConvSpec::allocate() {
  weights.assign(weight_count(), 0.0f);
  bias.assign(has_bias ? out_channels : 0, 0.0f);
}

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1 || groups < 1) {
    throw Error("convolution channels and groups must be >= 1");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw Error("convolution channels must be divisible by groups");
  }
  temporal.validate("temporal");
  height.validate("height");
  width.validate("width");
  if (weights.size() != weight_count()) {
    throw Error("convolution weight length " + std::to_string(weights.size()) +
                " does not match expected " + std::to_string(weight_count()));
  }
  if (bias.size() != (has_bias ? static_cast<std::size_t>(out_channels) : 0u)) {
    throw Error("convolution bias length does not match out_channels");
  }
}

FrameShape ConvSpec::output_frame_shape(const FrameShape& in) const {
  if (in.channels != in_channels) {
    throw Error("convolution expects " + std::to_string(in_channels) +
                " input channels, got " + std::to_string(in.channels));
  }
  return {out_channels, output_size(in.height, height), output_size(in.width, width)};
}

std::size_t CoConvState::floats() const {
  std::size_t n = 0;
  for (const auto& f : mem) n += f.size();
  return n;
}

namespace detail {

bool spatially_pointwise(const ConvSpec& spec) {
  const DimSpec& h = spec.height;
  const DimSpec& w = spec.width;
  return h.kernel == 1 && w.kernel == 1 && h.stride == 1 && w.stride == 1 && h.padding == 0 &&
         w.padding == 0;
}

void accumulate_pointwise(const ConvSpec& spec, int kt, const float* in,
                          std::size_t in_cstride, float* out, std::size_t out_cstride,
                          std::size_t positions) {
  const int cig = spec.in_channels / spec.groups;
  const int cog = spec.out_channels / spec.groups;
  for (int g = 0; g < spec.groups; ++g) {
    for (int col = 0; col < cog; ++col) {
      const int co = g * cog + col;
      float* o = out + co * out_cstride;
      for (int cil = 0; cil < cig; ++cil) {
        const float w = spec.weight(co, cil, kt, 0, 0);
        const float* x = in + (g * cig + cil) * in_cstride;
        for (std::size_t p = 0; p < positions; ++p) o[p] += w * x[p];
      }
    }
  }
}

void accumulate_spatial(const ConvSpec& spec, int kt, const float* in,
                        std::size_t in_cstride, int in_h, int in_w, float* out,
                        std::size_t out_cstride, int out_h, int out_w) {
  if (spatially_pointwise(spec)) {
    accumulate_pointwise(spec, kt, in, in_cstride, out, out_cstride,
                         static_cast<std::size_t>(out_h) * out_w);
    return;
  }
  const int cig = spec.in_channels / spec.groups;
  const int cog = spec.out_channels / spec.groups;
  const int sh = spec.height.stride, sw = spec.width.stride;
  const int dh = spec.height.dilation, dw = spec.width.dilation;
  const int ph = spec.height.padding, pw = spec.width.padding;

  for (int g = 0; g < spec.groups; ++g) {
    for (int col = 0; col < cog; ++col) {
      const int co = g * cog + col;
      float* o = out + co * out_cstride;
      for (int cil = 0; cil < cig; ++cil) {
        const float* x = in + (g * cig + cil) * in_cstride;
        for (int kh = 0; kh < spec.height.kernel; ++kh) {
          for (int kw = 0; kw < spec.width.kernel; ++kw) {
            const float w = spec.weight(co, cil, kt, kh, kw);
            const int shift_w = kw * dw - pw;
            // Output columns whose input column lies inside the frame.
            int ow_lo = 0;
            if (shift_w < 0) ow_lo = (-shift_w + sw - 1) / sw;
            int ow_hi = out_w - 1;
            if ((out_w - 1) * sw + shift_w > in_w - 1) {
              ow_hi = (in_w - 1 - shift_w) >= 0 ? (in_w - 1 - shift_w) / sw : -1;
            }
            if (ow_lo > ow_hi) continue;
            for (int oh = 0; oh < out_h; ++oh) {
              const int ih = oh * sh + kh * dh - ph;
              if (ih < 0 || ih >= in_h) continue;
              const float* xr = x + static_cast<std::size_t>(ih) * in_w + shift_w;
              float* orow = o + static_cast<std::size_t>(oh) * out_w;
              if (sw == 1) {
                for (int ow = ow_lo; ow <= ow_hi; ++ow) orow[ow] += w * xr[ow];
              } else {
                for (int ow = ow_lo; ow <= ow_hi; ++ow) orow[ow] += w * xr[ow * sw];
              }
            }
          }
        }
      }
    }
  }
}

void add_bias(const ConvSpec& spec, float* out, std::size_t out_cstride,
              std::size_t plane) {
  if (!spec.has_bias) return;
  for (int co = 0; co < spec.out_channels; ++co) {
    float* o = out + co * out_cstride;
    for (std::size_t i = 0; i < plane; ++i) o[i] += spec.bias[co];
  }
}

}  // namespace detail

ClipTensor conv3d_regular(const ClipTensor& clip, const ConvSpec& spec) {
  return conv3d_regular(clip, spec, spec.temporal.padding, spec.temporal.padding);
}

ClipTensor conv3d_regular(const ClipTensor& clip, const ConvSpec& spec, int pad_front,
                          int pad_back) {
  spec.validate();
  const FrameShape out_frame = spec.output_frame_shape(clip.frame_shape());
  const int nt = output_size(clip.time(), spec.temporal, pad_front, pad_back);
  ClipTensor out(out_frame.channels, nt, out_frame.height, out_frame.width);
  const DimSpec& t = spec.temporal;
  if (t.kernel == 1 && t.stride == 1 && pad_front == 0 && pad_back == 0 &&
      detail::spatially_pointwise(spec)) {
    // Every frame at once; per-element order matches the per-frame path.
    detail::accumulate_pointwise(spec, 0, clip.plane_ptr(0, 0), clip.channel_stride(),
                                 out.plane_ptr(0, 0), out.channel_stride(),
                                 out.channel_stride());
    detail::add_bias(spec, out.plane_ptr(0, 0), out.channel_stride(), out.channel_stride());
    return out;
  }
  for (int ot = 0; ot < nt; ++ot) {
    // Taps are accumulated oldest first, then the bias, matching the
    // streaming accumulation order.
    for (int kt = 0; kt < t.kernel; ++kt) {
      const int it = ot * t.stride + kt * t.dilation - pad_front;
      if (it < 0 || it >= clip.time()) continue;
      detail::accumulate_spatial(spec, kt, clip.plane_ptr(0, it), clip.channel_stride(),
                                 clip.height(), clip.width(), out.plane_ptr(0, ot),
                                 out.channel_stride(), out.height(), out.width());
    }
    detail::add_bias(spec, out.plane_ptr(0, ot), out.channel_stride(), out.plane());
  }
  return out;
}

int coconv_delay(const ConvSpec& spec) {
  const DimSpec& t = spec.temporal;
  return t.dilation * (t.kernel - t.padding - 1);
}

CoConvState coconv_init(const ConvSpec& spec, const FrameShape& input, InitScheme scheme,
                        const FrameTensor* seed_frame) {
  spec.validate();
  if (spec.temporal.padding > spec.temporal.kernel - 1) {
    throw Error("temporal padding exceeds kernel size - 1; delay would be negative");
  }
  const FrameShape out = spec.output_frame_shape(input);
  CoConvState state;
  state.mem.assign(spec.temporal.span(), FrameTensor(out));
  if (scheme == InitScheme::replicate) {
    if (seed_frame == nullptr) throw Error("replicate initialisation requires a seed frame");
    if (seed_frame->shape() != input) throw Error("seed frame shape does not match input");
    for (int i = 0; i < spec.temporal.span(); ++i) coconv_step(*seed_frame, state, spec);
  }
  return state;
}

StepOutput coconv_step(const FrameTensor& frame, CoConvState& state, const ConvSpec& spec) {
  const FrameShape out_shape = spec.output_frame_shape(frame.shape());
  const int k = spec.temporal.kernel;
  const int d = spec.temporal.dilation;
  const int s = spec.temporal.stride;
  const int delay = coconv_delay(spec);
  const std::size_t m = state.mem.size();
  if (m != static_cast<std::size_t>(spec.temporal.span())) {
    throw Error("convolution state length does not match the kernel");
  }
  if (m > 0 && state.mem.front().shape() != out_shape) {
    throw Error("convolution state shape " + to_string(state.mem.front().shape()) +
                " does not match output shape " + to_string(out_shape));
  }

  const std::int64_t now = state.seen;
  const std::size_t in_cs = frame.shape().plane();
  const std::size_t out_cs = out_shape.plane();

  StepOutput result;
  if (on_emission_grid(now, delay, s)) {
    // Newest tap completes the sum accumulated for this step.
    FrameTensor out = m > 0 ? std::move(state.mem[state.index]) : FrameTensor(out_shape);
    detail::accumulate_spatial(spec, k - 1, frame.channel(0), in_cs, frame.height(),
                               frame.width(), out.channel(0), out_cs, out.height(),
                               out.width());
    detail::add_bias(spec, out.channel(0), out_cs, out_cs);
    result.valid = now >= delay;
    result.value = std::move(out);
  }

  if (m > 0) {
    // The freed slot now collects the output due m steps ahead.
    FrameTensor& freed = state.mem[state.index];
    if (freed.size() != out_shape.numel()) {
      freed = FrameTensor(out_shape);
    } else {
      freed.fill(0.0f);
    }
    for (int kt = 0; kt < k - 1; ++kt) {
      const std::int64_t ahead = static_cast<std::int64_t>(d) * (k - 1 - kt);
      if (!on_emission_grid(now + ahead, delay, s)) continue;
      FrameTensor& slot = state.mem[(state.index + ahead) % m];
      detail::accumulate_spatial(spec, kt, frame.channel(0), in_cs, frame.height(),
                                 frame.width(), slot.channel(0), out_cs, slot.height(),
                                 slot.width());
    }
    state.index = (state.index + 1) % m;
  }
  ++state.seen;
  return result;
}

}  // namespace costream
