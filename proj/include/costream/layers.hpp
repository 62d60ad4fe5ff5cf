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

#ifndef COSTREAM_LAYERS_HPP_
#define COSTREAM_LAYERS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "costream/conv.hpp"
#include "costream/tensor.hpp"

namespace costream {

enum class PoolKind { avg, max };

// Padded cells count as zeros for average pooling. Max pooling skips spatial
// padding; temporal padding is always zero frames, which is what a
// zero-initialised streaming state reproduces.
struct PoolSpec {
  PoolKind kind = PoolKind::avg;
  DimSpec temporal;
  DimSpec height;
  DimSpec width;

  void validate() const;
  FrameShape output_frame_shape(const FrameShape& in) const;
};

struct CoPoolState {
  std::vector<FrameTensor> mem;  // k_T - 1 spatially pooled maps
  std::size_t index = 0;
  std::int64_t seen = 0;

  std::size_t floats() const;
};

struct DelayLineState {
  int delay = 0;
  std::vector<FrameTensor> queue;
  std::size_t index = 0;
  std::int64_t seen = 0;

  std::size_t floats() const;
};

enum class Activation { identity, relu, swish, sigmoid };

float activate(Activation fn, float x);
void activate_inplace(Activation fn, std::span<float> xs);

// Inference-mode batch normalisation parameters.
struct NormSpec {
  int channels = 0;
  float epsilon = 1e-5f;
  std::vector<float> scale;
  std::vector<float> shift;
  std::vector<float> mean;
  std::vector<float> var;

  void allocate();
  void validate() const;
};

// Squeeze-and-excitation. With `temporal_pool` the squeeze averages over the
// whole clip; the streaming form averages each frame spatially only.
struct SeSpec {
  int channels = 0;
  int reduction = 16;
  Activation activation = Activation::relu;
  bool temporal_pool = false;
  std::vector<float> w1;  // (hidden, channels)
  std::vector<float> b1;  // (hidden)
  std::vector<float> w2;  // (channels, hidden)
  std::vector<float> b2;  // (channels)

  // floor(channels / reduction), at least one.
  int hidden() const;
  void allocate();
  void validate() const;
};

ClipTensor pool3d_regular(const ClipTensor& clip, const PoolSpec& spec, int pad_front,
                          int pad_back);
FrameTensor pool2d(const FrameTensor& frame, const PoolSpec& spec);

CoPoolState copool_init(const PoolSpec& spec, const FrameShape& input);
StepOutput copool_step(const FrameTensor& frame, CoPoolState& state, const PoolSpec& spec);
// k_T - p_T - 1.
int copool_delay(const PoolSpec& spec);

DelayLineState delay_init(int delay, const FrameShape& shape);
StepOutput delay_step(const FrameTensor& frame, DelayLineState& state);

FrameTensor se_block_step(const FrameTensor& frame, const SeSpec& spec);
ClipTensor se_block_clip(const ClipTensor& clip, const SeSpec& spec);

FrameTensor norm_infer(const FrameTensor& frame, const NormSpec& spec);
ClipTensor norm_infer(const ClipTensor& clip, const NormSpec& spec);

// Per-step momentum matching the moving-average dynamics of clip training.
double momentum_adjust(double mom_clip, int timesteps);

std::string to_string(Activation fn);
std::string to_string(PoolKind kind);

}  // namespace costream

#endif  // COSTREAM_LAYERS_HPP_
