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

#ifndef COSTREAM_NETWORK_HPP_
#define COSTREAM_NETWORK_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "costream/conv.hpp"
#include "costream/layers.hpp"
#include "costream/tensor.hpp"

namespace costream {

struct ConvLayer {
  std::string name;
  ConvSpec conv;
};

struct PoolLayer {
  std::string name;
  PoolSpec pool;
};

// Pools the whole frame spatially and `temporal_kernel` frames in time.
struct GlobalPoolLayer {
  std::string name;
  PoolKind kind = PoolKind::avg;
  int temporal_kernel = 1;
};

struct ActivationLayer {
  std::string name;
  Activation fn = Activation::relu;
};

struct NormLayer {
  std::string name;
  NormSpec norm;
};

struct SeLayer {
  std::string name;
  SeSpec se;
};

// Per-position channel projection, weights (out_features, in_features).
struct LinearLayer {
  std::string name;
  int in_features = 1;
  int out_features = 1;
  bool has_bias = true;
  std::vector<float> weights;
  std::vector<float> bias;

  void allocate();
  void validate() const;
};

struct Layer;

// out = inner(x) + shortcut(x). The shortcut must be temporally pointwise and
// an empty shortcut is the identity. In streaming form the shortcut input is
// delayed by `skip_delay` frames; when unset the matching delay is used.
struct ResidualLayer {
  std::string name;
  std::vector<Layer> inner;
  std::vector<Layer> shortcut;
  std::optional<int> skip_delay;
};

struct Layer {
  using Op = std::variant<ConvLayer, PoolLayer, GlobalPoolLayer, ActivationLayer, NormLayer,
                          SeLayer, LinearLayer, ResidualLayer>;
  Op op;

  Layer() = default;
  template <typename T>
    requires(!std::is_same_v<std::remove_cvref_t<T>, Layer>)
  Layer(T&& value) : op(std::forward<T>(value)) {}  // NOLINT(google-explicit-constructor)
};

enum class LayerKind { conv3d, pool, global_pool, activation, norm, se, linear, residual };

LayerKind kind_of(const Layer& layer);
const std::string& name_of(const Layer& layer);
std::string to_string(LayerKind kind);

struct NetworkSpec {
  FrameShape input;
  double frame_rate = 0.0;  // informational only
  bool continual = false;
  std::vector<Layer> layers;
};

// Temporal window of a single non-residual layer.
struct TemporalDims {
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  int span() const { return dilation * (kernel - 1); }
  // Steps between a frame's arrival and the emission of the output whose
  // window ends at it.
  int delay() const { return dilation * (kernel - padding - 1); }
};

TemporalDims temporal_dims(const Layer& layer);

// Output frame shape of one layer; throws on channel or size mismatch.
FrameShape layer_output_shape(const Layer& layer, const FrameShape& in);

// Checks channel chaining, residual consistency and name uniqueness, and with
// `parameters` also every parameter length. Returns the output frame shape.
FrameShape validate(const NetworkSpec& net, bool parameters = false);

// One entry per layer in depth-first order; a residual block precedes its
// inner layers, which precede its shortcut layers.
struct LayerInfo {
  const Layer* layer = nullptr;
  std::string name;
  LayerKind kind = LayerKind::activation;
  FrameShape in;
  FrameShape out;
  TemporalDims temporal;
  std::int64_t jump = 1;     // network input frames per step of this layer's input
  int depth = 0;             // residual nesting
  bool on_shortcut = false;
  std::int64_t skip_delay = 0;  // residual only, in block input steps
};

std::vector<LayerInfo> flatten(const NetworkSpec& net);

struct ReceptiveSummary {
  std::int64_t r_t = 1;
  std::int64_t p_t = 0;
  std::int64_t transient_len = 0;
  std::int64_t total_delay = 0;
  std::int64_t output_stride = 1;
};

ReceptiveSummary analyze(const NetworkSpec& net);

// Delay of a layer list in steps of its input.
std::int64_t path_delay(const std::vector<Layer>& layers);
std::int64_t path_stride(const std::vector<Layer>& layers);

struct ContinualOptions {
  std::optional<int> global_pool_temporal;
};

NetworkSpec convert_to_continual(const NetworkSpec& net, const ContinualOptions& options = {});

// Names of layers whose declared temporal padding is dropped in streaming.
std::vector<std::string> padded_layers(const NetworkSpec& net);

// Visits every parameter tensor with its entry name and shape.
using ParamVisitor =
    std::function<void(const std::string& name, const std::vector<int>& shape,
                       std::vector<float>& values)>;
void for_each_parameter(NetworkSpec& net, const ParamVisitor& fn);
using ConstParamVisitor =
    std::function<void(const std::string& name, const std::vector<int>& shape,
                       const std::vector<float>& values)>;
void for_each_parameter(const NetworkSpec& net, const ConstParamVisitor& fn);

// Allocates every parameter and fills it with the seeded default
// initialisation: fan-in scaled uniform weights, small biases, and
// normalisation statistics near identity.
void randomize_parameters(NetworkSpec& net, std::uint64_t seed);
void allocate_parameters(NetworkSpec& net);

enum class TemporalPadding {
  none,      // valid convolution in time
  causal,    // d * p zero frames in front, as a zero-initialised stream sees
  declared,  // p zero frames on both ends, as the clip-wise model was trained
};

struct ClipTraceEntry {
  std::string name;
  ClipTensor output;
  std::int64_t newest0 = 0;  // input frame index of the newest frame behind output 0
  std::int64_t jump = 1;
};

struct ClipResult {
  ClipTensor output;
  std::int64_t newest0 = 0;
  std::int64_t jump = 1;
};

ClipResult forward_clip(const NetworkSpec& net, const ClipTensor& clip,
                        TemporalPadding padding = TemporalPadding::causal,
                        std::vector<ClipTraceEntry>* trace = nullptr);

// Flattened last temporal position of forward_clip.
std::vector<float> forward_clip_last(const NetworkSpec& net, const ClipTensor& clip,
                                     TemporalPadding padding = TemporalPadding::causal);

using StepTraceFn =
    std::function<void(const std::string& name, std::int64_t step, const FrameTensor& value)>;

namespace detail {
class Node;
}

// Compiled streaming form of a network. Each layer only consumes valid
// outputs of its predecessor; zeroed states therefore act as causal zero
// padding of the first frames.
class CoNetwork {
 public:
  explicit CoNetwork(NetworkSpec spec);
  ~CoNetwork();
  CoNetwork(CoNetwork&&) noexcept;
  CoNetwork& operator=(CoNetwork&&) noexcept;

  StepOutput step(const FrameTensor& frame);
  // Zeroes every state and the step counter.
  void reset();
  void reset_counter() { steps_ = 0; }

  std::size_t state_floats() const;
  std::int64_t steps() const { return steps_; }
  const NetworkSpec& spec() const { return *spec_; }
  const ReceptiveSummary& summary() const { return summary_; }

  // Called with every valid layer output, keyed by the network step.
  void set_trace(StepTraceFn fn) { trace_ = std::move(fn); }

 private:
  std::shared_ptr<const NetworkSpec> spec_;
  std::vector<std::unique_ptr<detail::Node>> nodes_;
  ReceptiveSummary summary_;
  std::int64_t steps_ = 0;
  StepTraceFn trace_;
};

// zeros: fresh states. replicate: the seed frame is streamed r_T - 1 times
// and the outputs discarded, so every state holds its boring-video value.
CoNetwork stream_init(const NetworkSpec& net, InitScheme scheme,
                      const FrameTensor* first_frame = nullptr);
StepOutput stream_step(CoNetwork& net, const FrameTensor& frame);

}  // namespace costream

#endif  // COSTREAM_NETWORK_HPP_
