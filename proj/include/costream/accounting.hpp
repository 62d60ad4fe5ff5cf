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

#ifndef COSTREAM_ACCOUNTING_HPP_
#define COSTREAM_ACCOUNTING_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "costream/conv.hpp"
#include "costream/network.hpp"

namespace costream {

// How multiply-accumulates are turned into FLOPs. The default counts one MAC
// as one FLOP and includes the bias term of each output.
struct FlopConvention {
  int mac_as = 1;
  bool count_bias = true;
};

enum class CostMode { clip, continual };

struct CostRow {
  std::string name;
  LayerKind kind = LayerKind::conv3d;
  double flops_per_frame = 0.0;        // one step of this layer
  double flops_per_clip = 0.0;         // clip-wise inference over the whole clip
  double elementwise_per_frame = 0.0;  // normalisation, activations, additions, gating
  double elementwise_per_clip = 0.0;
  std::int64_t state_floats = 0;
  std::int64_t transient_floats = 0;
  std::int64_t delay_frames = 0;       // in steps of this layer's input
  std::int64_t jump = 1;               // input frames per step of this layer's input
  std::string state_expression;        // e.g. "(5-1) x 24 x 112 x 112"
};

struct CostReport {
  CostMode mode = CostMode::continual;
  int clip_size = 1;
  FlopConvention convention;
  std::vector<CostRow> rows;

  double flops_per_frame = 0.0;  // amortised per input frame
  double flops_per_clip = 0.0;
  double elementwise_per_frame = 0.0;
  double elementwise_per_clip = 0.0;
  std::int64_t state_floats = 0;
  std::int64_t max_transient_floats = 0;
  std::string max_transient_layer;
  std::int64_t frame_cache_floats = 0;  // clip mode only
  std::int64_t worst_case_floats = 0;
  std::int64_t delay_frames = 0;
};

// [k_H k_W k_T + b] (c_I / groups) c_O n_H n_W n_T.
double conv_flops_clip(const ConvSpec& spec, const FrameShape& out, int n_t,
                       const FlopConvention& conv = {});
// The same without n_T.
double conv_flops_frame(const ConvSpec& spec, const FrameShape& out,
                        const FlopConvention& conv = {});

// In continual mode `clip_size`, when given, replaces the temporal kernel of
// the final global pooling layer. In clip mode it is the clip length and
// defaults to that kernel.
CostReport memory_report(const NetworkSpec& net, CostMode mode,
                         std::optional<int> clip_size = std::nullopt,
                         const FlopConvention& conv = {});

// Share of state held by residual delay lines.
double residual_fraction(const CostReport& report);
// Share of state held by temporal pooling.
double pool_state_fraction(const CostReport& report);

// Stage-level summary of state rows: consecutive blocks with equal rows are
// merged, e.g. residual_2-3.
struct GroupedRow {
  std::string stage;
  std::string label;
  std::string expression;
  std::int64_t floats = 0;
};

std::vector<GroupedRow> group_state_rows(const CostReport& report);

std::string to_string(CostMode mode);

}  // namespace costream

#endif  // COSTREAM_ACCOUNTING_HPP_
