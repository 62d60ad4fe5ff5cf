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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "costream/accounting.hpp"
#include "costream/harness.hpp"
#include "costream/models.hpp"
#include "nets.hpp"
#include "oracles.hpp"

namespace {

using namespace costream;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("[%s] C%-2d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double v, double target, double rel) { return std::fabs(v - target) <= rel * target; }

void c1_single_layer() {
  const auto t0 = Clock::now();
  std::mt19937 rng(1001);
  const int kernels[] = {1, 2, 3, 5};
  double worst = 0.0;
  int bad_steps = 0, bad_counts = 0;
  for (int trial = 0; trial < 200; ++trial) {
    ConvSpec s;
    s.in_channels = 1 + int(rng() % 3);
    s.out_channels = 1 + int(rng() % 3);
    s.temporal = {kernels[rng() % 4], 1 + int(rng() % 2), 1 + int(rng() % 2), 0};
    s.height = {1 + int(rng() % 3), 1 + int(rng() % 2), 1, int(rng() % 2)};
    s.width = s.height;
    s.has_bias = rng() % 2 == 0;
    oracle::randomize(rng, s);
    const FrameShape in{s.in_channels, 3 + int(rng() % 4), 3 + int(rng() % 4)};
    const int frames = s.temporal.span() + 1 + int(rng() % 10);
    std::vector<FrameTensor> fs;
    for (int t = 0; t < frames; ++t) fs.push_back(oracle::random_frame(rng, in));
    const ClipTensor ref = oracle::conv3d(clip_from_frames(fs), s, 0, 0);
    CoConvState st = coconv_init(s, in, InitScheme::zeros);
    int j = 0;
    for (int t = 0; t < frames; ++t) {
      const StepOutput out = coconv_step(fs[t], st, s);
      if (!out.valid) continue;
      if (t != j * s.temporal.stride + s.temporal.span() || j >= ref.time()) {
        ++bad_steps;
        break;
      }
      worst = std::max<double>(worst, oracle::max_abs_diff(out.value->data(), ref.frame(j).data()));
      ++j;
    }
    if (j != ref.time()) ++bad_counts;
  }
  const double secs = seconds_since(t0);
  report(1, "single-layer oracle equivalence", worst <= 1e-5 && !bad_steps && !bad_counts && secs < 60,
         fmt("200 specs, max |diff| %.3g (tol 1e-5), emission-step errors %d, count errors %d, %.2fs",
             worst, bad_steps, bad_counts, secs));
}

void c2_end_to_end() {
  const auto t0 = Clock::now();
  X3dOptions o;
  o.resolution = 56;
  auto net = builtin_x3d_m(o);
  randomize_parameters(net, 2024);
  VerifyOptions v;
  v.frames = 90;
  v.seed = 7;
  v.tolerance = 1e-4;
  const VerifyReport r = verify_stream(net, v);
  const double secs = seconds_since(t0);
  report(2, "end-to-end X3D-M equivalence", r.passed && r.valid_outputs > 0 && secs < 300,
         fmt("90 frames at 56x56, %d valid outputs from step %lld, max |diff| %.3g (tol 1e-4), %.1fs",
             r.valid_outputs, (long long)r.first_valid_step, r.max_deviation, secs));
}

struct TableRow {
  const char* stage;
  const char* label;
  std::int64_t floats;
};

void c3_state_table() {
  const CostReport rep = memory_report(convert_to_continual(builtin_x3d_m()), CostMode::continual);
  const TableRow want[] = {
      {"conv1", "conv_t", 1204224},       {"res2", "residual_1", 301056},
      {"res2", "residual_2-3", 150528},   {"res2", "conv_1-3", 508032},
      {"res3", "residual_1", 75264},      {"res3", "residual_2-5", 150528},
      {"res3", "conv_1-5", 846720},       {"res4", "residual_1", 37632},
      {"res4", "residual_2-11", 188160},  {"res4", "conv_1-11", 931392},
      {"res5", "residual_1", 18816},      {"res5", "residual_2-7", 56448},
      {"res5", "conv_1-7", 296352},       {"pool5", "-", 6480},
  };
  const auto got = group_state_rows(rep);
  std::ostringstream diffs;
  int mismatched = 0;
  for (const TableRow& w : want) {
    std::int64_t have = -1;
    for (const GroupedRow& g : got) {
      if (g.stage == w.stage && g.label == w.label) have = g.floats;
    }
    if (have != w.floats) {
      ++mismatched;
      diffs << " " << w.stage << "." << w.label << "=" << have << " (want " << w.floats << ")";
    }
  }
  const bool ok = rep.state_floats == 4771632 && rep.worst_case_floats == 5072688 &&
                  mismatched == 0 && got.size() == std::size(want);
  report(3, "streaming X3D-M state table", ok,
         fmt("state %lld (want 4771632), worst case %lld (want 5072688), %d/%zu rows differ",
             (long long)rep.state_floats, (long long)rep.worst_case_floats, mismatched,
             std::size(want)) + diffs.str());
}

void c4_clip_sizes() {
  const NetworkSpec net = builtin_x3d_m();
  const NetworkSpec co = convert_to_continual(net);
  struct Case {
    const char* label;
    std::int64_t got;
    std::int64_t want;
  };
  const Case cases[] = {
      {"clip 16", memory_report(net, CostMode::clip, 16).worst_case_floats, 7074816},
      {"clip 4", memory_report(net, CostMode::clip, 4).worst_case_floats, 1655808},
      {"clip 64", memory_report(net, CostMode::clip, 64).worst_case_floats, 28449792},
      {"continual pool 4", memory_report(co, CostMode::continual, 4).worst_case_floats, 5067504},
      {"continual pool 64", memory_report(co, CostMode::continual, 64).worst_case_floats, 5093424},
  };
  bool ok = true;
  std::ostringstream s;
  for (const Case& c : cases) {
    ok = ok && c.got == c.want;
    s << (s.tellp() ? ", " : "") << c.label << " " << c.got << " (want " << c.want << ")";
  }
  report(4, "worst-case memory versus clip size", ok, s.str());
}

void c5_receptive_fields() {
  const X3dSize sizes[] = {X3dSize::s, X3dSize::m, X3dSize::l};
  const std::int64_t r[] = {69, 72, 130}, p[] = {28, 28, 57}, tr[] = {40, 43, 72};
  bool ok = true;
  std::ostringstream s;
  for (int i = 0; i < 3; ++i) {
    const ReceptiveSummary a = analyze(builtin_x3d(sizes[i]));
    ok = ok && a.r_t == r[i] && a.p_t == p[i] && a.transient_len == tr[i];
    s << (i ? ", " : "") << "XSML"[i + 1] << ": r_T " << a.r_t << " p_T " << a.p_t
      << " transient " << a.transient_len;
  }
  report(5, "receptive field analysis", ok, s.str() + " (want 69/28/40, 72/28/43, 130/57/72)");
}

void c6_residual_share() {
  const CostReport rep = memory_report(convert_to_continual(builtin_x3d_m()), CostMode::continual);
  const double f = residual_fraction(rep);
  report(6, "residual memory share", std::fabs(f - 0.205) <= 0.002,
         fmt("%.4f (want 0.205 +- 0.002)", f));
}

void c7_flops() {
  const NetworkSpec net = builtin_x3d_m();
  const CostReport clip = memory_report(net, CostMode::clip);
  const CostReport cont = memory_report(convert_to_continual(net), CostMode::continual);
  int bad = 0, convs = 0;
  for (std::size_t i = 0; i < clip.rows.size(); ++i) {
    if (clip.rows[i].kind != LayerKind::conv3d) continue;
    ++convs;
    if (clip.rows[i].flops_per_clip != cont.rows[i].flops_per_frame * clip.clip_size) ++bad;
  }
  const double gc = clip.flops_per_clip / 1e9, gf = cont.flops_per_frame / 1e9;
  const double ratio = clip.flops_per_clip / cont.flops_per_frame;
  const bool ok = within(gc, 4.97, 0.10) && within(gf, 0.33, 0.10) && bad == 0 &&
                  within(ratio, 15.06, 0.05);
  report(7, "FLOP accounting", ok,
         fmt("clip %.3f G (4.97 +-10%%), frame %.4f G (0.33 +-10%%), %d/%d conv ratios != %d, "
             "network ratio %.2f (15.06 +-5%%)",
             gc, gf, bad, convs, clip.clip_size, ratio));
}

void c8_transient() {
  X3dOptions o;
  o.resolution = 64;
  auto net = builtin_x3d_s(o);
  randomize_parameters(net, 88);
  TransientOptions t;
  t.frames = 44;
  t.seed = 3;
  const TransientReport zeros = transient_trace(net, t);
  bool early_invalid = true, late_match = true;
  double dev = 0.0;
  for (const TransientRow& r : zeros.rows) {
    if (r.step < 41 && r.valid) early_invalid = false;
    if (r.step >= 41) {
      late_match = late_match && r.valid && r.deviation && *r.deviation <= 1e-4;
      if (r.deviation) dev = std::max(dev, *r.deviation);
    }
  }

  const NetworkSpec co = convert_to_continual(net);
  const auto frames = synthetic_stream(co.input, 1, 5);
  CoNetwork stream = stream_init(co, InitScheme::replicate, &frames[0]);
  const StepOutput first = stream_step(stream, frames[0]);
  const int r_t = static_cast<int>(analyze(co).r_t);
  const std::vector<float> boring =
      forward_clip_last(co, clip_from_frames(std::vector<FrameTensor>(r_t, frames[0])));
  double rep_dev = INFINITY;
  if (first.valid) rep_dev = oracle::max_abs_diff(first.value->data(), boring);
  const bool ok = zeros.first_valid_step == 41 && early_invalid && late_match && rep_dev <= 1e-4;
  report(8, "transient boundary", ok,
         fmt("X3D-S at 64x64: first valid step %lld (want 41), earlier steps invalid: %s, "
             "later max |diff| %.3g; replicate step 1 valid: %s, |diff| to boring clip %.3g (tol 1e-4)",
             (long long)zeros.first_valid_step, early_invalid ? "yes" : "no", dev,
             first.valid ? "yes" : "no", rep_dev));
}

void c9_state_audit() {
  std::mt19937 rng(909);
  int mismatched = 0;
  std::int64_t total = 0;
  for (int i = 0; i < 50; ++i) {
    NetworkSpec net = convert_to_continual(nets::random_network(rng));
    allocate_parameters(net);
    const CoNetwork co(net);
    const std::int64_t held = static_cast<std::int64_t>(co.state_floats() * sizeof(float));
    const std::int64_t reported =
        memory_report(net, CostMode::continual).state_floats * std::int64_t(sizeof(float));
    if (held != reported) ++mismatched;
    total += held;
  }
  report(9, "measured state audit", mismatched == 0,
         fmt("50 random networks, %d mismatched, %lld bytes held in total", mismatched,
             (long long)total));
}

void c10_throughput() {
  auto net = nets::toy_network(8, 16, 16);
  randomize_parameters(net, 10);
  BenchOptions o;
  o.repetitions = 3;
  o.warmup = 1;
  o.steps = 16;
  o.window = 16;
  o.mode = BenchMode::clip;
  const BenchResult clip = bench(net, o);
  o.mode = BenchMode::continual;
  const BenchResult cont = bench(net, o);
  const double ratio = cont.mean / clip.mean;
  report(10, "throughput direction", ratio > 1.0,
         fmt("toy net, 16-frame window: continual %.1f/s, clip %.1f/s, ratio %.2f (want > 1)",
             cont.mean, clip.mean, ratio));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks = {
      c1_single_layer, c2_end_to_end, c3_state_table, c4_clip_sizes, c5_receptive_fields,
      c6_residual_share, c7_flops, c8_transient, c9_state_audit, c10_throughput};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    try {
      checks[i]();
    } catch (const std::exception& e) {
      report(int(i + 1), "exception", false, e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, checks.size());
  return failures == 0 ? 0 : 1;
}
