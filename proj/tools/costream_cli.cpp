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

// Command-line front end: verify, cost, transient, bench, analyze, convert.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "costream/accounting.hpp"
#include "costream/harness.hpp"
#include "costream/io.hpp"
#include "costream/models.hpp"
#include "costream/network.hpp"
#include "json.hpp"

namespace {

using namespace costream;
using nlohmann::json;

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string spec;
  int resolution = 0;
  std::string weights;
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_weights) {
  cmd->add_option("--spec", c.spec, "Spec document path or builtin name (x3d-s, x3d-m, x3d-l)")
      ->required();
  cmd->add_option("--resolution", c.resolution, "Input side for builtin specs");
  cmd->add_option("--out", c.out, "Write the report here instead of standard output");
  if (with_weights) {
    cmd->add_option("--weights", c.weights,
                    "Weight file; missing entries use the seeded default initialisation");
  }
  cmd->add_option("--seed", c.seed, "Seed for synthetic streams and default weights");
}

NetworkSpec resolve_spec(const Common& c) {
  if (auto size = parse_x3d_name(c.spec)) {
    X3dOptions o;
    if (c.resolution > 0) o.resolution = c.resolution;
    return builtin_x3d(*size, o);
  }
  if (c.resolution > 0) throw Error("--resolution only applies to builtin specs");
  return load_spec_file(c.spec);
}

NetworkSpec with_weights(NetworkSpec net, const Common& c) {
  if (c.weights.empty()) {
    randomize_parameters(net, c.seed);
    return net;
  }
  const WeightLoadResult r = load_weights_file(c.weights, net, c.seed);
  if (!r.missing.empty()) {
    std::cerr << "warning: " << r.missing.size()
              << " parameter tensors missing from the weight file were initialised from the "
                 "seed, starting with '"
              << r.missing.front() << "'\n";
  }
  return net;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw Error("cannot write '" + c.out + "'");
  f << text;
}

void warn_model_shift(const NetworkSpec& net) {
  const std::vector<std::string> padded = padded_layers(net);
  if (padded.empty()) return;
  std::cerr << "warning: streaming drops the declared temporal padding of " << padded.size()
            << " layer(s); outputs shift relative to the clip-wise model:";
  for (std::size_t i = 0; i < padded.size(); ++i) {
    std::cerr << (i ? ", " : " ") << padded[i];
  }
  std::cerr << "\n";
}

int run_verify(const Common& c, int frames, double tolerance) {
  const NetworkSpec net = with_weights(resolve_spec(c), c);
  VerifyOptions o;
  o.frames = frames;
  o.seed = c.seed;
  o.tolerance = tolerance;
  const VerifyReport r = verify_stream(net, o);
  json doc = {{"frames", r.frames},
              {"r_t", r.summary.r_t},
              {"transient_len", r.summary.transient_len},
              {"first_valid_step", r.first_valid_step},
              {"valid_outputs", r.valid_outputs},
              {"max_deviation", r.max_deviation},
              {"tolerance", tolerance},
              {"passed", r.passed}};
  json steps = json::array();
  for (const auto& [step, dev] : r.deviations) steps.push_back({{"step", step}, {"deviation", dev}});
  doc["steps"] = steps;
  if (r.divergence) {
    doc["first_divergence"] = {{"step", r.divergence->step},
                               {"layer", r.divergence->layer},
                               {"deviation", r.divergence->deviation}};
  }
  emit(c, doc.dump(2) + "\n");
  std::cerr << (r.passed ? "PASS" : "FAIL") << ": max deviation " << r.max_deviation << " over "
            << r.valid_outputs << " valid outputs";
  if (r.divergence) {
    std::cerr << "; first divergence at step " << r.divergence->step << " in layer '"
              << r.divergence->layer << "'";
  }
  std::cerr << "\n";
  return r.passed ? 0 : kExitFail;
}

int run_cost(const Common& c, const std::string& mode, int clip_size, int mac_as, bool no_bias,
             const std::string& format) {
  NetworkSpec net = resolve_spec(c);
  const CostMode m = mode == "clip" ? CostMode::clip : CostMode::continual;
  if (m == CostMode::continual && !net.continual) net = convert_to_continual(net);
  FlopConvention conv;
  conv.mac_as = mac_as;
  conv.count_bias = !no_bias;
  const CostReport r = memory_report(
      net, m, clip_size > 0 ? std::optional<int>(clip_size) : std::nullopt, conv);
  if (format == "json") {
    emit(c, report_json(r));
  } else if (format == "csv") {
    emit(c, report_csv(r));
  } else {
    emit(c, report_table(r));
  }
  return 0;
}

int run_transient(const Common& c, const std::string& init, int frames, bool no_oracle) {
  const NetworkSpec net = with_weights(resolve_spec(c), c);
  TransientOptions o;
  o.init = init == "replicate" ? InitScheme::replicate : InitScheme::zeros;
  o.frames = frames;
  o.seed = c.seed;
  o.oracle = !no_oracle;
  const TransientReport r = transient_trace(net, o);
  emit(c, transient_csv(r));
  const std::int64_t expected = o.init == InitScheme::zeros ? r.summary.transient_len + 1 : 1;
  std::cerr << "first valid step " << r.first_valid_step << " (transient length "
            << r.summary.transient_len << ", expected " << expected << ")\n";
  return r.first_valid_step == expected ? 0 : kExitFail;
}

json bench_json(const BenchResult& r) {
  json j = {{"mode", to_string(r.mode)},
            {"streams", r.streams},
            {"repetitions", r.repetitions},
            {"warmup", r.warmup},
            {"predictions_per_second", r.mean},
            {"stddev", r.stddev}};
  if (r.mode == BenchMode::clip) j["window"] = r.window;
  return j;
}

int run_bench(const Common& c, const std::string& mode, BenchOptions o) {
  const NetworkSpec net = with_weights(resolve_spec(c), c);
  o.seed = c.seed;
  json doc;
  if (mode == "both") {
    o.mode = BenchMode::clip;
    const BenchResult clip = bench(net, o);
    o.mode = BenchMode::continual;
    const BenchResult cont = bench(net, o);
    doc = {{"clip", bench_json(clip)},
           {"continual", bench_json(cont)},
           {"speedup", cont.mean / clip.mean}};
  } else {
    o.mode = mode == "clip" ? BenchMode::clip : BenchMode::continual;
    doc = bench_json(bench(net, o));
  }
  emit(c, doc.dump(2) + "\n");
  return 0;
}

int run_analyze(const Common& c) {
  emit(c, summary_json(analyze(resolve_spec(c))));
  return 0;
}

int run_convert(const Common& c, int pool_temporal) {
  const NetworkSpec net = resolve_spec(c);
  ContinualOptions o;
  if (pool_temporal > 0) o.global_pool_temporal = pool_temporal;
  const NetworkSpec co = convert_to_continual(net, o);
  warn_model_shift(net);
  emit(c, serialize_spec(co));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming inference and cost accounting for 3D convolutional networks"};
  app.require_subcommand(1);

  Common verify_c, cost_c, transient_c, bench_c, analyze_c, convert_c;

  auto* verify = app.add_subcommand("verify", "Compare streaming outputs with the clip oracle");
  add_common(verify, verify_c, true);
  int verify_frames = 0;
  double tolerance = 1e-4;
  verify->add_option("--frames", verify_frames, "Stream length (default r_T + 8)");
  verify->add_option("--tolerance", tolerance, "Maximum absolute deviation")
      ->check(CLI::PositiveNumber);

  auto* cost = app.add_subcommand(
      "cost",
      "FLOP and memory report. CSV columns: name,kind,flops_per_frame,flops_per_clip,"
      "elementwise_per_frame,elementwise_per_clip,state_floats,transient_floats,delay_frames,"
      "jump");
  add_common(cost, cost_c, false);
  std::string cost_mode = "continual", format = "table";
  int clip_size = 0, mac_as = 1;
  bool no_bias = false;
  cost->add_option("--mode", cost_mode, "clip or continual")
      ->check(CLI::IsMember({"clip", "continual"}));
  cost->add_option("--clip-size", clip_size,
                   "Clip length (clip mode) or final pool kernel (continual mode)");
  cost->add_option("--mac-as", mac_as, "FLOPs per multiply-accumulate")
      ->check(CLI::IsMember({1, 2}));
  cost->add_flag("--no-bias", no_bias, "Leave bias terms out of FLOP counts");
  cost->add_option("--format", format, "json, csv or table")
      ->check(CLI::IsMember({"json", "csv", "table"}));

  auto* transient = app.add_subcommand(
      "transient", "Per-step validity and oracle deviation; CSV columns: step,valid,deviation");
  add_common(transient, transient_c, true);
  std::string init = "zeros";
  int transient_frames = 0;
  bool no_oracle = false;
  transient->add_option("--init", init, "zeros or replicate")
      ->check(CLI::IsMember({"zeros", "replicate"}));
  transient->add_option("--frames", transient_frames, "Stream length (default transient + 8)");
  transient->add_flag("--no-oracle", no_oracle, "Skip the deviation column");

  auto* bench_cmd = app.add_subcommand("bench", "Predictions per second on synthetic streams");
  add_common(bench_cmd, bench_c, true);
  std::string bench_mode = "both";
  BenchOptions bo;
  bench_cmd->add_option("--mode", bench_mode, "clip, continual or both")
      ->check(CLI::IsMember({"clip", "continual", "both"}));
  bench_cmd->add_option("--streams", bo.streams, "Concurrent streams")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repetitions", bo.repetitions, "Timed repetitions")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bo.warmup, "Untimed repetitions")
      ->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--steps", bo.steps, "Predictions per stream per repetition")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--window", bo.window, "Clip length in clip mode");

  auto* analyze_cmd = app.add_subcommand("analyze", "Receptive field, padding and transient");
  add_common(analyze_cmd, analyze_c, false);

  auto* convert = app.add_subcommand("convert", "Write the streaming form of a spec document");
  add_common(convert, convert_c, false);
  int pool_temporal = 0;
  convert->add_option("--pool-temporal", pool_temporal,
                      "Temporal kernel of the final global pool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*verify) return run_verify(verify_c, verify_frames, tolerance);
    if (*cost) return run_cost(cost_c, cost_mode, clip_size, mac_as, no_bias, format);
    if (*transient) return run_transient(transient_c, init, transient_frames, no_oracle);
    if (*bench_cmd) return run_bench(bench_c, bench_mode, bo);
    if (*analyze_cmd) return run_analyze(analyze_c);
    if (*convert) return run_convert(convert_c, pool_temporal);
  } catch (const costream::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
