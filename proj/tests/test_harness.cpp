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

#include "costream/harness.hpp"
#include "nets.hpp"

namespace {

using namespace costream;

NetworkSpec small_net() {
  auto net = nets::toy_network(4, 6, 4);
  randomize_parameters(net, 17);
  return net;
}

TEST(Synthetic, Deterministic) {
  const auto a = synthetic_stream({2, 3, 3}, 4, 9);
  const auto b = synthetic_stream({2, 3, 3}, 4, 9);
  const auto c = synthetic_stream({2, 3, 3}, 4, 10);
  ASSERT_EQ(a.size(), 4u);
  auto vec = [](const FrameTensor& f) { return std::vector<float>(f.data().begin(), f.data().end()); };
  EXPECT_EQ(vec(a[3]), vec(b[3]));
  EXPECT_NE(vec(a[3]), vec(c[3]));
}

TEST(Verify, NeedsAFullWindow) {
  VerifyOptions o;
  o.frames = 3;
  EXPECT_THROW(verify_stream(small_net(), o), Error);
}

TEST(Transient, ZerosInitBecomesValidAfterTransient) {
  const auto net = small_net();
  const auto r = transient_trace(net, {});
  ASSERT_EQ(std::int64_t(r.rows.size()), r.summary.transient_len + 8);
  EXPECT_EQ(r.first_valid_step, r.summary.transient_len + 1);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.valid, row.step > r.summary.transient_len);
    if (row.valid) {
      ASSERT_TRUE(row.deviation.has_value());
      EXPECT_LT(*row.deviation, 1e-5);
    }
  }
}

TEST(Transient, ReplicateInitIsValidImmediately) {
  TransientOptions o;
  o.init = InitScheme::replicate;
  const auto r = transient_trace(small_net(), o);
  EXPECT_EQ(r.first_valid_step, 1);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.valid);
    EXPECT_LT(*row.deviation, 1e-5);
  }
}

TEST(Transient, CsvLayout) {
  TransientOptions o;
  o.frames = 5;
  o.oracle = false;
  const auto csv = transient_csv(transient_trace(small_net(), o));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,valid,deviation");
  EXPECT_NE(csv.find("\n1,0,\n"), std::string::npos);
}

TEST(Bench, ReportsBothModes) {
  const auto net = small_net();
  BenchOptions o;
  o.repetitions = 2;
  o.steps = 4;
  for (const auto mode : {BenchMode::clip, BenchMode::continual}) {
    o.mode = mode;
    for (const int streams : {1, 2}) {
      o.streams = streams;
      const auto r = bench(net, o);
      EXPECT_EQ(r.samples.size(), 2u);
      EXPECT_GT(r.mean, 0.0);
      if (mode == BenchMode::clip) EXPECT_EQ(r.window, 4);
    }
  }
}

}  // namespace
