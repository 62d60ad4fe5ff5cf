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

#ifndef COSTREAM_CONV_HPP_
#define COSTREAM_CONV_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "costream/tensor.hpp"

namespace costream {

// Hyperparameters and parameters of one 3D convolution.
//
// Weights are laid out (c_O, c_I / groups, k_T, k_H, k_W). The temporal
// padding is the padding declared by the clip-wise layer; streaming execution
// never pads the stream itself but uses it for delay bookkeeping.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int groups = 1;
  DimSpec temporal;
  DimSpec height;
  DimSpec width;
  bool has_bias = false;
  std::vector<float> weights;
  std::vector<float> bias;

  std::size_t weight_count() const;
  // Resizes weights and bias to match the hyperparameters, zero-filled.
  void allocate();
  void validate() const;
  FrameShape output_frame_shape(const FrameShape& in) const;

  float weight(int co, int ci_local, int kt, int kh, int kw) const {
    const std::size_t cig = static_cast<std::size_t>(in_channels / groups);
    return weights[(((co * cig + ci_local) * temporal.kernel + kt) * height.kernel + kh) *
                       width.kernel + kw];
  }
};

// Output of a single streaming step. `valid` is false while the operator is in
// its transient and whenever a temporal stride suppresses emission; `value` is
// present whenever the step lands on the emission grid, even inside the
// transient.
struct StepOutput {
  std::optional<FrameTensor> value;
  bool valid = false;
};

enum class InitScheme { zeros, replicate };

// Ring buffer of partially accumulated output frames. Slot (index + j) holds
// the running sum for the output due j steps from now.
struct CoConvState {
  std::vector<FrameTensor> mem;
  std::size_t index = 0;
  std::int64_t seen = 0;

  std::size_t floats() const;
};

// Direct clip-wise convolution with the declared zero padding on every axis.
ClipTensor conv3d_regular(const ClipTensor& clip, const ConvSpec& spec);

// As above, with explicit temporal padding at the front and back of the clip.
ClipTensor conv3d_regular(const ClipTensor& clip, const ConvSpec& spec, int pad_front,
                          int pad_back);

CoConvState coconv_init(const ConvSpec& spec, const FrameShape& input, InitScheme scheme,
                        const FrameTensor* seed_frame = nullptr);

StepOutput coconv_step(const FrameTensor& frame, CoConvState& state, const ConvSpec& spec);

// d_T * (k_T - p_T - 1), with p_T the declared temporal padding.
int coconv_delay(const ConvSpec& spec);

// Steps after which an operator with `delay` and temporal `stride` emits for
// input number `index` (0-based). Negative indices extend the grid backwards.
inline bool on_emission_grid(std::int64_t index, int delay, int stride) {
  std::int64_t r = (index - delay) % stride;
  if (r < 0) r += stride;
  return r == 0;
}

namespace detail {

// Adds temporal tap `kt` of the kernel, applied spatially to one input frame,
// into one output frame. Channel planes are `in_cstride` / `out_cstride` apart.
void accumulate_spatial(const ConvSpec& spec, int kt, const float* in,
                        std::size_t in_cstride, int in_h, int in_w, float* out,
                        std::size_t out_cstride, int out_h, int out_w);

bool spatially_pointwise(const ConvSpec& spec);

// Channel mixing over `positions` contiguous cells per channel.
void accumulate_pointwise(const ConvSpec& spec, int kt, const float* in,
                          std::size_t in_cstride, float* out, std::size_t out_cstride,
                          std::size_t positions);

void add_bias(const ConvSpec& spec, float* out, std::size_t out_cstride,
              std::size_t plane);

}  // namespace detail

}  // namespace costream

#endif  // COSTREAM_CONV_HPP_
