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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "costream/layers.hpp"
#include "oracles.hpp"

namespace costream {
namespace {

FrameTensor scalar(float v) { return FrameTensor({1, 1, 1}, v); }

PoolSpec temporal_pool(PoolKind kind, int k) {
  PoolSpec p;
  p.kind = kind;
  p.temporal.kernel = k;
  return p;
}

TEST(CoPool, PointwiseTemporalKernel) {
  PoolSpec p = temporal_pool(PoolKind::max, 1);
  p.height = p.width = {2, 2, 1, 0};
  CoPoolState st = copool_init(p, {1, 4, 4});
  EXPECT_TRUE(st.mem.empty());
  std::mt19937 rng(1);
  const FrameTensor f = oracle::random_frame(rng, {1, 4, 4});
  const StepOutput out = copool_step(f, st, p);
  ASSERT_TRUE(out.valid);
  EXPECT_EQ(*out.value, pool2d(f, p));
  EXPECT_EQ(copool_delay(p), 0);
}

TEST(CoPool, RunningMean) {
  const PoolSpec p = temporal_pool(PoolKind::avg, 3);
  CoPoolState st = copool_init(p, {1, 1, 1});
  std::vector<StepOutput> outs;
  for (float v : {1.0f, 2.0f, 3.0f, 4.0f}) outs.push_back(copool_step(scalar(v), st, p));
  EXPECT_FALSE(outs[0].valid);
  EXPECT_FALSE(outs[1].valid);
  ASSERT_TRUE(outs[2].valid);
  ASSERT_TRUE(outs[3].valid);
  EXPECT_FLOAT_EQ(outs[2].value->at(0, 0, 0), 2.0f);
  EXPECT_FLOAT_EQ(outs[3].value->at(0, 0, 0), 3.0f);
}

// Independent average/max over a 3D window with no padding.
ClipTensor pool_oracle(const ClipTensor& x, const PoolSpec& p) {
  const int nt = (x.time() - p.temporal.kernel) / p.temporal.stride + 1;
  const int nh = (x.height() + 2 * p.height.padding - p.height.kernel) / p.height.stride + 1;
  const int nw = (x.width() + 2 * p.width.padding - p.width.kernel) / p.width.stride + 1;
  ClipTensor y(x.channels(), nt, nh, nw);
  for (int c = 0; c < x.channels(); ++c) {
    for (int t = 0; t < nt; ++t) {
      for (int i = 0; i < nh; ++i) {
        for (int j = 0; j < nw; ++j) {
          double sum = 0.0;
          float mx = -INFINITY;
          for (int a = 0; a < p.temporal.kernel; ++a) {
            for (int b = 0; b < p.height.kernel; ++b) {
              for (int e = 0; e < p.width.kernel; ++e) {
                const int ii = i * p.height.stride + b - p.height.padding;
                const int jj = j * p.width.stride + e - p.width.padding;
                if (ii < 0 || jj < 0 || ii >= x.height() || jj >= x.width()) continue;
                const float v = x.at(c, t * p.temporal.stride + a, ii, jj);
                sum += v;
                mx = std::max(mx, v);
              }
            }
          }
          y.at(c, t, i, j) = p.kind == PoolKind::avg
                                 ? static_cast<float>(sum / (p.temporal.kernel *
                                                             p.height.kernel * p.width.kernel))
                                 : mx;
        }
      }
    }
  }
  return y;
}

TEST(CoPool, StreamMatchesRegular) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    PoolSpec p = temporal_pool(trial % 2 ? PoolKind::max : PoolKind::avg,
                               1 + static_cast<int>(rng() % 4));
    p.temporal.stride = 1 + static_cast<int>(rng() % 2);
    p.height = p.width = {1 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 2),
                          1, 0};
    const FrameShape in{2, 5, 5};
    std::vector<FrameTensor> fs;
    for (int t = 0; t < 9; ++t) fs.push_back(oracle::random_frame(rng, in));
    const ClipTensor x = clip_from_frames(fs);
    const ClipTensor ref = pool_oracle(x, p);
    EXPECT_LE(oracle::max_abs_diff(pool3d_regular(x, p, 0, 0).data(), ref.data()), 1e-6f);
    CoPoolState st = copool_init(p, in);
    EXPECT_EQ(st.floats(),
              static_cast<std::size_t>(p.temporal.kernel - 1) * p.output_frame_shape(in).numel());
    int j = 0;
    for (int t = 0; t < 9; ++t) {
      const StepOutput out = copool_step(fs[t], st, p);
      if (!out.valid) continue;
      EXPECT_EQ(t, j * p.temporal.stride + p.temporal.kernel - 1);
      const float diff = oracle::max_abs_diff(out.value->data(), ref.frame(j).data());
      if (p.kind == PoolKind::max) {
        EXPECT_EQ(diff, 0.0f);
      } else {
        EXPECT_LE(diff, 1e-6f);
      }
      ++j;
    }
    EXPECT_EQ(j, ref.time());
  }
}

TEST(CoPool, ShapeMismatch) {
  const PoolSpec p = temporal_pool(PoolKind::avg, 2);
  CoPoolState st = copool_init(p, {1, 2, 2});
  EXPECT_THROW(copool_step(FrameTensor({1, 3, 3}), st, p), Error);
}

TEST(DelayLine, Passthrough) {
  DelayLineState st = delay_init(0, {1, 1, 1});
  for (float v : {1.0f, 2.0f}) {
    const StepOutput out = delay_step(scalar(v), st);
    ASSERT_TRUE(out.valid);
    EXPECT_EQ(out.value->at(0, 0, 0), v);
  }
}

TEST(DelayLine, Fifo) {
  DelayLineState st = delay_init(2, {1, 1, 1});
  std::vector<StepOutput> outs;
  for (float v : {1.0f, 2.0f, 3.0f, 4.0f}) outs.push_back(delay_step(scalar(v), st));
  EXPECT_FALSE(outs[0].valid);
  EXPECT_FALSE(outs[1].valid);
  ASSERT_TRUE(outs[2].valid);
  EXPECT_EQ(outs[2].value->at(0, 0, 0), 1.0f);
  EXPECT_EQ(outs[3].value->at(0, 0, 0), 2.0f);
  EXPECT_EQ(st.floats(), 2u);
}

TEST(DelayLine, BitExactOrder) {
  std::mt19937 rng(5);
  DelayLineState st = delay_init(3, {2, 3, 3});
  std::vector<FrameTensor> fs;
  for (int t = 0; t < 10; ++t) {
    fs.push_back(oracle::random_frame(rng, {2, 3, 3}));
    const StepOutput out = delay_step(fs.back(), st);
    if (t >= 3) EXPECT_EQ(*out.value, fs[t - 3]);
  }
}

TEST(DelayLine, AlignsResidualWithConv) {
  // x + delay(x, D) next to a k=3 conv lines up with the unrolled block.
  std::mt19937 rng(6);
  ConvSpec s;
  s.in_channels = s.out_channels = 2;
  s.temporal = {3, 1, 1, 0};
  s.height = s.width = {3, 1, 1, 1};
  oracle::randomize(rng, s);
  const FrameShape in{2, 4, 4};
  std::vector<FrameTensor> fs;
  for (int t = 0; t < 8; ++t) fs.push_back(oracle::random_frame(rng, in));
  const ClipTensor x = clip_from_frames(fs);
  const ClipTensor conv = oracle::conv3d(x, s, 0, 0);
  CoConvState cs = coconv_init(s, in, InitScheme::zeros);
  DelayLineState ds = delay_init(coconv_delay(s), in);
  for (int t = 0; t < 8; ++t) {
    const StepOutput a = coconv_step(fs[t], cs, s);
    const StepOutput b = delay_step(fs[t], ds);
    ASSERT_EQ(a.valid, b.valid);
    if (!a.valid) continue;
    const int j = t - 2;
    for (int c = 0; c < 2; ++c) {
      for (int h = 0; h < 4; ++h) {
        for (int w = 0; w < 4; ++w) {
          const float got = a.value->at(c, h, w) + b.value->at(c, h, w);
          // The skip frame sits at the newest-minus-delay position of the window.
          const float want = conv.at(c, j, h, w) + x.at(c, j, h, w);
          EXPECT_NEAR(got, want, 1e-5f);
        }
      }
    }
  }
}

SeSpec small_se(std::mt19937& rng, int c, int r) {
  SeSpec se;
  se.channels = c;
  se.reduction = r;
  se.allocate();
  for (float& v : se.w1) v = oracle::uniform(rng);
  for (float& v : se.b1) v = oracle::uniform(rng);
  for (float& v : se.w2) v = oracle::uniform(rng);
  for (float& v : se.b2) v = oracle::uniform(rng);
  return se;
}

TEST(Se, ClosedForm) {
  SeSpec se;
  se.channels = 2;
  se.reduction = 2;
  se.allocate();
  se.w1 = {1.0f, -1.0f};
  se.b1 = {0.5f};
  se.w2 = {2.0f, -1.0f};
  se.b2 = {0.0f, 1.0f};
  FrameTensor f({2, 2, 2});
  for (int h = 0; h < 2; ++h) {
    for (int w = 0; w < 2; ++w) {
      f.at(0, h, w) = 3.0f;
      f.at(1, h, w) = 1.0f;
    }
  }
  const float hidden = std::max(0.0f, 3.0f - 1.0f + 0.5f);
  const float g0 = 1.0f / (1.0f + std::exp(-2.0f * hidden));
  const float g1 = 1.0f / (1.0f + std::exp(hidden - 1.0f));
  const FrameTensor out = se_block_step(f, se);
  EXPECT_NEAR(out.at(0, 1, 1), 3.0f * g0, 1e-6f);
  EXPECT_NEAR(out.at(1, 0, 1), 1.0f * g1, 1e-6f);
}

TEST(Se, ZeroSecondProjectionHalves) {
  std::mt19937 rng(8);
  SeSpec se = small_se(rng, 8, 4);
  std::fill(se.w2.begin(), se.w2.end(), 0.0f);
  std::fill(se.b2.begin(), se.b2.end(), 0.0f);
  const FrameTensor f = oracle::random_frame(rng, {8, 3, 3});
  const FrameTensor out = se_block_step(f, se);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_FLOAT_EQ(out.data()[i], 0.5f * f.data()[i]);
}

TEST(Se, MatchesTemporalVariantOnBoringClip) {
  std::mt19937 rng(9);
  SeSpec se = small_se(rng, 6, 3);
  const FrameTensor f = oracle::random_frame(rng, {6, 4, 4});
  std::vector<FrameTensor> fs(5, f);
  SeSpec se3 = se;
  se3.temporal_pool = true;
  const ClipTensor y = se_block_clip(clip_from_frames(fs), se3);
  const FrameTensor out = se_block_step(f, se);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LE(oracle::max_abs_diff(y.frame(t).data(), out.data()), 1e-6f);
  }
}

TEST(Se, HiddenSizeRounding) {
  SeSpec se;
  se.channels = 24;
  se.reduction = 16;
  EXPECT_EQ(se.hidden(), 1);
  se.channels = 54;
  EXPECT_EQ(se.hidden(), 3);
  se.channels = 3;
  EXPECT_EQ(se.hidden(), 1);
}

TEST(Se, NoTemporalState) {
  std::mt19937 rng(10);
  const SeSpec se = small_se(rng, 4, 2);
  const FrameTensor f = oracle::random_frame(rng, {4, 3, 3});
  const FrameTensor first = se_block_step(f, se);
  se_block_step(oracle::random_frame(rng, {4, 3, 3}), se);
  EXPECT_EQ(se_block_step(f, se), first);
  EXPECT_THROW(se_block_step(FrameTensor({3, 3, 3}), se), Error);
}

TEST(Norm, Identity) {
  NormSpec n;
  n.channels = 2;
  n.epsilon = 0.0f;
  n.allocate();
  std::mt19937 rng(11);
  const FrameTensor f = oracle::random_frame(rng, {2, 3, 3});
  EXPECT_EQ(norm_infer(f, n), f);
}

TEST(Norm, MeanMapsToShift) {
  NormSpec n;
  n.channels = 1;
  n.allocate();
  n.mean = {1.5f};
  n.var = {4.0f};
  n.scale = {3.0f};
  n.shift = {-0.25f};
  EXPECT_FLOAT_EQ(norm_infer(FrameTensor({1, 2, 2}, 1.5f), n).at(0, 1, 1), -0.25f);
}

TEST(Norm, MatchesFormula) {
  std::mt19937 rng(12);
  NormSpec n;
  n.channels = 3;
  n.allocate();
  for (int c = 0; c < 3; ++c) {
    n.scale[c] = oracle::uniform(rng);
    n.shift[c] = oracle::uniform(rng);
    n.mean[c] = oracle::uniform(rng);
    n.var[c] = oracle::uniform(rng, 0.1f, 2.0f);
  }
  const FrameTensor f = oracle::random_frame(rng, {3, 2, 3});
  const FrameTensor y = norm_infer(f, n);
  for (int c = 0; c < 3; ++c) {
    for (int h = 0; h < 2; ++h) {
      for (int w = 0; w < 3; ++w) {
        const float want = (f.at(c, h, w) - n.mean[c]) / std::sqrt(n.var[c] + n.epsilon) *
                               n.scale[c] + n.shift[c];
        EXPECT_NEAR(y.at(c, h, w), want, 1e-6f);
      }
    }
  }
  n.var[1] = -1.0f;
  EXPECT_THROW(n.validate(), Error);
}

TEST(Momentum, Values) {
  for (double m : {0.01, 0.1, 0.5, 1.0}) EXPECT_DOUBLE_EQ(momentum_adjust(m, 1), m);
  EXPECT_NEAR(momentum_adjust(0.1, 16), 2.0 / 305.0, 1e-12);
  for (int t : {1, 4, 16}) EXPECT_DOUBLE_EQ(momentum_adjust(1.0, t), 2.0 / (1.0 + t));
  EXPECT_THROW(momentum_adjust(0.1, 0), Error);
}

TEST(Pool, DecompositionAcrossAxes) {
  std::mt19937 rng(13);
  for (PoolKind kind : {PoolKind::avg, PoolKind::max}) {
    PoolSpec p = temporal_pool(kind, 3);
    p.height = p.width = {2, 2, 1, 0};
    const ClipTensor x = oracle::random_clip(rng, 2, 6, 6, 6);
    const ClipTensor full = pool3d_regular(x, p, 0, 0);
    PoolSpec spatial = p;
    spatial.temporal = {};
    const ClipTensor s = pool3d_regular(x, spatial, 0, 0);
    PoolSpec temporal = temporal_pool(kind, 3);
    const ClipTensor split = pool3d_regular(s, temporal, 0, 0);
    const float diff = oracle::max_abs_diff(full.data(), split.data());
    if (kind == PoolKind::max) {
      EXPECT_EQ(diff, 0.0f);
    } else {
      EXPECT_LE(diff, 1e-6f);
    }
  }
}

TEST(Activation, Values) {
  EXPECT_EQ(activate(Activation::relu, -2.0f), 0.0f);
  EXPECT_EQ(activate(Activation::relu, 2.0f), 2.0f);
  EXPECT_FLOAT_EQ(activate(Activation::sigmoid, 0.0f), 0.5f);
  EXPECT_FLOAT_EQ(activate(Activation::swish, 2.0f), 2.0f / (1.0f + std::exp(-2.0f)));
  EXPECT_EQ(activate(Activation::identity, -3.0f), -3.0f);
}

}  // namespace
}  // namespace costream
