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

#ifndef COSTREAM_RANDOM_HPP_
#define COSTREAM_RANDOM_HPP_

#include <cstdint>
#include <random>

#include "costream/tensor.hpp"

namespace costream {

// Seeded generator with a fixed float mapping, so streams and weights are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 24 bits of resolution.
  float uniform() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

inline FrameTensor random_frame(Rng& rng, const FrameShape& shape, float lo = -1.0f,
                                float hi = 1.0f) {
  FrameTensor f(shape);
  for (float& v : f.data()) v = rng.uniform(lo, hi);
  return f;
}

}  // namespace costream

#endif  // COSTREAM_RANDOM_HPP_
