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

#ifndef COSTREAM_MODELS_HPP_
#define COSTREAM_MODELS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "costream/network.hpp"

namespace costream {

enum class X3dSize { s, m, l };

struct X3dOptions {
  std::optional<int> resolution;      // square input side; defaults per size
  std::optional<int> pool_temporal;   // final pool temporal kernel; defaults per size
  int num_classes = 400;
};

// Clip-wise X3D with empty parameter tensors. Each bottleneck block is
// conv_a 1x1x1, conv_b 3x3x3 depthwise, SE on every other block, swish,
// conv_c 1x1x1, followed by a rectifier after the residual addition.
NetworkSpec builtin_x3d(X3dSize size, const X3dOptions& options = {});

inline NetworkSpec builtin_x3d_s(const X3dOptions& o = {}) { return builtin_x3d(X3dSize::s, o); }
inline NetworkSpec builtin_x3d_m(const X3dOptions& o = {}) { return builtin_x3d(X3dSize::m, o); }
inline NetworkSpec builtin_x3d_l(const X3dOptions& o = {}) { return builtin_x3d(X3dSize::l, o); }

// Default clip length (final pool temporal kernel) for each size.
int x3d_clip_size(X3dSize size);

// "x3d-s", "x3d-m", "x3d-l"; nullopt for anything else.
std::optional<X3dSize> parse_x3d_name(const std::string& name);
std::vector<std::string> builtin_names();

}  // namespace costream

#endif  // COSTREAM_MODELS_HPP_
