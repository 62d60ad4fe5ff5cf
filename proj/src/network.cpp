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

#include "costream/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "costream/random.hpp"

namespace costream {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void LinearLayer::allocate() {
  weights.assign(static_cast<std::size_t>(in_features) * out_features, 0.0f);
  bias.assign(has_bias ? out_features : 0, 0.0f);
}

void LinearLayer::validate() const {
  if (in_features < 1 || out_features < 1) throw Error("linear layer sizes must be >= 1");
  if (weights.size() != static_cast<std::size_t>(in_features) * out_features ||
      bias.size() != (has_bias ? static_cast<std::size_t>(out_features) : 0u)) {
    throw Error("linear layer '" + name + "' parameters do not match its sizes");
  }
}

LayerKind kind_of(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const ConvLayer&) { return LayerKind::conv3d; },
                        [](const PoolLayer&) { return LayerKind::pool; },
                        [](const GlobalPoolLayer&) { return LayerKind::global_pool; },
                        [](const ActivationLayer&) { return LayerKind::activation; },
                        [](const NormLayer&) { return LayerKind::norm; },
                        [](const SeLayer&) { return LayerKind::se; },
                        [](const LinearLayer&) { return LayerKind::linear; },
                        [](const ResidualLayer&) { return LayerKind::residual; },
                    },
                    layer.op);
}

const std::string& name_of(const Layer& layer) {
  return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer.op);
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3d:
      return "conv3d";
    case LayerKind::pool:
      return "pool";
    case LayerKind::global_pool:
      return "global_pool";
    case LayerKind::activation:
      return "activation";
    case LayerKind::norm:
      return "norm";
    case LayerKind::se:
      return "se";
    case LayerKind::linear:
      return "linear";
    case LayerKind::residual:
      return "residual";
  }
  return "unknown";
}

TemporalDims temporal_dims(const Layer& layer) {
  if (const auto* c = std::get_if<ConvLayer>(&layer.op)) {
    const DimSpec& t = c->conv.temporal;
    return {t.kernel, t.stride, t.dilation, t.padding};
  }
  if (const auto* p = std::get_if<PoolLayer>(&layer.op)) {
    const DimSpec& t = p->pool.temporal;
    return {t.kernel, t.stride, t.dilation, t.padding};
  }
  if (const auto* g = std::get_if<GlobalPoolLayer>(&layer.op)) {
    return {g->temporal_kernel, 1, 1, 0};
  }
  if (std::holds_alternative<ResidualLayer>(layer.op)) {
    throw Error("residual blocks have no single temporal window");
  }
  return {};
}

namespace {

PoolSpec global_pool_spec(const GlobalPoolLayer& g, const FrameShape& in) {
  PoolSpec p;
  p.kind = g.kind;
  p.temporal = {g.temporal_kernel, 1, 1, 0};
  p.height = {in.height, 1, 1, 0};
  p.width = {in.width, 1, 1, 0};
  return p;
}

FrameShape chain_shapes(const std::vector<Layer>& layers, FrameShape shape) {
  for (const Layer& l : layers) shape = layer_output_shape(l, shape);
  return shape;
}

void check_parameters(const Layer& layer) {
  std::visit(Overloaded{
                 [](const ConvLayer& c) { c.conv.validate(); },
                 [](const NormLayer& n) { n.norm.validate(); },
                 [](const SeLayer& s) { s.se.validate(); },
                 [](const LinearLayer& l) { l.validate(); },
                 [](const ResidualLayer& r) {
                   for (const Layer& l : r.inner) check_parameters(l);
                   for (const Layer& l : r.shortcut) check_parameters(l);
                 },
                 [](const auto&) {},
             },
             layer.op);
}

void collect_names(const std::vector<Layer>& layers, std::set<std::string>& seen) {
  for (const Layer& l : layers) {
    const std::string& n = name_of(l);
    if (n.empty()) throw Error("every layer needs a name");
    if (!seen.insert(n).second) throw Error("duplicate layer name '" + n + "'");
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      collect_names(r->inner, seen);
      collect_names(r->shortcut, seen);
    }
  }
}

}  // namespace

std::int64_t path_delay(const std::vector<Layer>& layers) {
  std::int64_t delay = 0;
  std::int64_t jump = 1;
  for (const Layer& l : layers) {
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      delay += jump * path_delay(r->inner);
      jump *= path_stride(r->inner);
    } else {
      const TemporalDims t = temporal_dims(l);
      delay += jump * t.delay();
      jump *= t.stride;
    }
  }
  return delay;
}

std::int64_t path_stride(const std::vector<Layer>& layers) {
  std::int64_t jump = 1;
  for (const Layer& l : layers) {
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      jump *= path_stride(r->inner);
    } else {
      jump *= temporal_dims(l).stride;
    }
  }
  return jump;
}

FrameShape layer_output_shape(const Layer& layer, const FrameShape& in) {
  const std::string& name = name_of(layer);
  try {
    return std::visit(
        Overloaded{
            [&](const ConvLayer& c) {
              const ConvSpec& s = c.conv;
              if (s.in_channels < 1 || s.out_channels < 1 || s.groups < 1 ||
                  s.in_channels % s.groups != 0 || s.out_channels % s.groups != 0) {
                throw Error("invalid channel/group configuration");
              }
              s.temporal.validate("temporal");
              s.height.validate("height");
              s.width.validate("width");
              return s.output_frame_shape(in);
            },
            [&](const PoolLayer& p) {
              p.pool.validate();
              return p.pool.output_frame_shape(in);
            },
            [&](const GlobalPoolLayer& g) {
              if (g.temporal_kernel < 1) throw Error("temporal kernel must be >= 1");
              return FrameShape{in.channels, 1, 1};
            },
            [&](const ActivationLayer&) { return in; },
            [&](const NormLayer& n) {
              if (n.norm.channels != in.channels) {
                throw Error("expects " + std::to_string(n.norm.channels) + " channels, got " +
                            std::to_string(in.channels));
              }
              return in;
            },
            [&](const SeLayer& s) {
              if (s.se.channels != in.channels) {
                throw Error("expects " + std::to_string(s.se.channels) + " channels, got " +
                            std::to_string(in.channels));
              }
              if (s.se.reduction < 1) throw Error("reduction must be >= 1");
              return in;
            },
            [&](const LinearLayer& l) {
              if (l.in_features != in.channels) {
                throw Error("expects " + std::to_string(l.in_features) + " features, got " +
                            std::to_string(in.channels));
              }
              if (l.out_features < 1) throw Error("out_features must be >= 1");
              return FrameShape{l.out_features, in.height, in.width};
            },
            [&](const ResidualLayer& r) {
              if (r.inner.empty()) throw Error("residual block has an empty inner path");
              const FrameShape a = chain_shapes(r.inner, in);
              const FrameShape b = chain_shapes(r.shortcut, in);
              if (a != b) {
                throw Error("inner path yields " + to_string(a) + " but shortcut yields " +
                            to_string(b));
              }
              for (const Layer& l : r.shortcut) {
                if (std::holds_alternative<ResidualLayer>(l.op) ||
                    temporal_dims(l).kernel != 1) {
                  throw Error("shortcut layers must be temporally pointwise");
                }
              }
              if (path_stride(r.shortcut) != path_stride(r.inner)) {
                throw Error("shortcut and inner path temporal strides differ");
              }
              if (r.skip_delay && *r.skip_delay < 0) throw Error("skip delay must be >= 0");
              return a;
            },
        },
        layer.op);
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind("layer '", 0) == 0) throw;
    throw Error("layer '" + name + "': " + msg);
  }
}

FrameShape validate(const NetworkSpec& net, bool parameters) {
  if (net.input.channels < 1 || net.input.height < 1 || net.input.width < 1) {
    throw Error("network input dimensions must be >= 1");
  }
  if (net.layers.empty()) throw Error("network has no layers");
  std::set<std::string> names;
  collect_names(net.layers, names);
  const FrameShape out = chain_shapes(net.layers, net.input);
  if (parameters) {
    for (const Layer& l : net.layers) check_parameters(l);
  }
  return out;
}

namespace {

void flatten_into(const std::vector<Layer>& layers, FrameShape shape, std::int64_t& jump,
                  int depth, bool shortcut, std::vector<LayerInfo>& out) {
  for (const Layer& l : layers) {
    LayerInfo info;
    info.layer = &l;
    info.name = name_of(l);
    info.kind = kind_of(l);
    info.in = shape;
    info.out = layer_output_shape(l, shape);
    info.jump = jump;
    info.depth = depth;
    info.on_shortcut = shortcut;
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      info.skip_delay = r->skip_delay ? *r->skip_delay : path_delay(r->inner);
      out.push_back(info);
      std::int64_t inner_jump = jump;
      flatten_into(r->inner, shape, inner_jump, depth + 1, false, out);
      std::int64_t sc_jump = jump;
      flatten_into(r->shortcut, shape, sc_jump, depth + 1, true, out);
      jump = inner_jump;
    } else {
      info.temporal = temporal_dims(l);
      out.push_back(info);
      jump *= info.temporal.stride;
    }
    shape = info.out;
  }
}

void receptive(const std::vector<Layer>& layers, ReceptiveSummary& s, std::int64_t& jump) {
  for (const Layer& l : layers) {
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      receptive(r->inner, s, jump);
      continue;
    }
    const TemporalDims t = temporal_dims(l);
    s.r_t += jump * t.span();
    s.p_t += jump * t.dilation * t.padding;
    s.total_delay += jump * t.delay();
    jump *= t.stride;
  }
}

}  // namespace

std::vector<LayerInfo> flatten(const NetworkSpec& net) {
  validate(net);
  std::vector<LayerInfo> out;
  std::int64_t jump = 1;
  flatten_into(net.layers, net.input, jump, 0, false, out);
  return out;
}

ReceptiveSummary analyze(const NetworkSpec& net) {
  validate(net);
  ReceptiveSummary s;
  std::int64_t jump = 1;
  receptive(net.layers, s, jump);
  s.transient_len = s.r_t - s.p_t - 1;
  s.output_stride = jump;
  return s;
}

namespace {

void convert_layers(std::vector<Layer>& layers) {
  for (Layer& l : layers) {
    std::visit(Overloaded{
                   [](ConvLayer& c) {
                     const DimSpec& t = c.conv.temporal;
                     if (t.padding > t.kernel - 1) {
                       throw Error("layer '" + c.name +
                                   "': temporal padding larger than kernel size - 1 cannot "
                                   "be streamed");
                     }
                   },
                   [](PoolLayer& p) { p.pool.validate(); },
                   [](SeLayer& s) { s.se.temporal_pool = false; },
                   [](ResidualLayer& r) {
                     convert_layers(r.inner);
                     convert_layers(r.shortcut);
                     r.skip_delay = static_cast<int>(path_delay(r.inner));
                   },
                   [](auto&) {},
               },
               l.op);
  }
}

GlobalPoolLayer* last_global_pool(std::vector<Layer>& layers) {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (auto* g = std::get_if<GlobalPoolLayer>(&it->op)) return g;
    if (auto* r = std::get_if<ResidualLayer>(&it->op)) {
      if (auto* g = last_global_pool(r->inner)) return g;
    }
  }
  return nullptr;
}

void padded_into(const std::vector<Layer>& layers, std::vector<std::string>& out) {
  for (const Layer& l : layers) {
    if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
      padded_into(r->inner, out);
      padded_into(r->shortcut, out);
    } else if (temporal_dims(l).padding > 0) {
      out.push_back(name_of(l));
    }
  }
}

}  // namespace

NetworkSpec convert_to_continual(const NetworkSpec& net, const ContinualOptions& options) {
  validate(net);
  NetworkSpec out = net;
  out.continual = true;
  convert_layers(out.layers);
  if (options.global_pool_temporal) {
    if (*options.global_pool_temporal < 1) throw Error("global pool kernel must be >= 1");
    GlobalPoolLayer* g = last_global_pool(out.layers);
    if (g == nullptr) throw Error("network has no global pooling layer to extend");
    g->temporal_kernel = *options.global_pool_temporal;
  }
  validate(out);
  return out;
}

std::vector<std::string> padded_layers(const NetworkSpec& net) {
  std::vector<std::string> out;
  padded_into(net.layers, out);
  return out;
}

namespace {

template <typename Spec, typename Fn>
void visit_params(Spec& layers, const Fn& fn) {
  for (auto& l : layers) {
    std::visit(Overloaded{
                   [&](auto& c) -> void {
                     using T = std::remove_cvref_t<decltype(c)>;
                     if constexpr (std::is_same_v<T, ConvLayer>) {
                       const ConvSpec& s = c.conv;
                       fn(c.name + ".weight",
                          std::vector<int>{s.out_channels, s.in_channels / s.groups,
                                           s.temporal.kernel, s.height.kernel, s.width.kernel},
                          c.conv.weights);
                       if (s.has_bias) fn(c.name + ".bias", std::vector<int>{s.out_channels}, c.conv.bias);
                     } else if constexpr (std::is_same_v<T, NormLayer>) {
                       const std::vector<int> shape{c.norm.channels};
                       fn(c.name + ".weight", shape, c.norm.scale);
                       fn(c.name + ".bias", shape, c.norm.shift);
                       fn(c.name + ".running_mean", shape, c.norm.mean);
                       fn(c.name + ".running_var", shape, c.norm.var);
                     } else if constexpr (std::is_same_v<T, SeLayer>) {
                       const int ch = c.se.channels;
                       const int h = c.se.hidden();
                       fn(c.name + ".fc1.weight", std::vector<int>{h, ch}, c.se.w1);
                       fn(c.name + ".fc1.bias", std::vector<int>{h}, c.se.b1);
                       fn(c.name + ".fc2.weight", std::vector<int>{ch, h}, c.se.w2);
                       fn(c.name + ".fc2.bias", std::vector<int>{ch}, c.se.b2);
                     } else if constexpr (std::is_same_v<T, LinearLayer>) {
                       fn(c.name + ".weight", std::vector<int>{c.out_features, c.in_features},
                          c.weights);
                       if (c.has_bias) fn(c.name + ".bias", std::vector<int>{c.out_features}, c.bias);
                     } else if constexpr (std::is_same_v<T, ResidualLayer>) {
                       visit_params(c.inner, fn);
                       visit_params(c.shortcut, fn);
                     }
                   },
               },
               l.op);
  }
}

}  // namespace

void for_each_parameter(NetworkSpec& net, const ParamVisitor& fn) { visit_params(net.layers, fn); }

void for_each_parameter(const NetworkSpec& net, const ConstParamVisitor& fn) {
  visit_params(net.layers, fn);
}

void allocate_parameters(NetworkSpec& net) {
  for_each_parameter(net, [](const std::string&, const std::vector<int>& shape,
                             std::vector<float>& values) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    if (values.size() != n) values.assign(n, 0.0f);
  });
}

void randomize_parameters(NetworkSpec& net, std::uint64_t seed) {
  allocate_parameters(net);
  Rng rng(seed);
  for_each_parameter(net, [&](const std::string& name, const std::vector<int>& shape,
                              std::vector<float>& values) {
    auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("running_var")) {
      for (float& v : values) v = rng.uniform(0.5f, 1.5f);
    } else if (ends_with("running_mean") || ends_with("bias")) {
      for (float& v : values) v = rng.uniform(-0.1f, 0.1f);
    } else if (shape.size() == 1) {
      // Normalisation scale.
      for (float& v : values) v = rng.uniform(0.5f, 1.5f);
    } else {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= static_cast<std::size_t>(shape[i]);
      const float a = std::sqrt(3.0f / static_cast<float>(fan_in));
      for (float& v : values) v = rng.uniform(-a, a);
    }
  });
}

// Clip execution.

namespace {

void linear_apply(const LinearLayer& l, const float* in, std::size_t plane, float* out) {
  for (int o = 0; o < l.out_features; ++o) {
    float* y = out + o * plane;
    const float b = l.has_bias ? l.bias[o] : 0.0f;
    std::fill(y, y + plane, 0.0f);
    for (int i = 0; i < l.in_features; ++i) {
      const float w = l.weights[static_cast<std::size_t>(o) * l.in_features + i];
      const float* x = in + i * plane;
      for (std::size_t p = 0; p < plane; ++p) y[p] += w * x[p];
    }
    for (std::size_t p = 0; p < plane; ++p) y[p] += b;
  }
}

std::pair<int, int> temporal_pads(const TemporalDims& t, TemporalPadding mode) {
  switch (mode) {
    case TemporalPadding::none:
      return {0, 0};
    case TemporalPadding::causal:
      return {t.dilation * t.padding, 0};
    case TemporalPadding::declared:
      return {t.padding, t.padding};
  }
  return {0, 0};
}

struct ClipState {
  ClipTensor x;
  std::int64_t newest0 = 0;
  std::int64_t jump = 1;
};

ClipState run_clip(const std::vector<Layer>& layers, ClipState st, TemporalPadding mode,
                   std::vector<ClipTraceEntry>* trace);

ClipState run_layer(const Layer& layer, ClipState st, TemporalPadding mode,
                    std::vector<ClipTraceEntry>* trace) {
  const ClipTensor& x = st.x;
  ClipState out;
  if (const auto* r = std::get_if<ResidualLayer>(&layer.op)) {
    ClipState rel{x, 0, 1};
    const std::size_t first = trace ? trace->size() : 0;
    const ClipState inner = run_clip(r->inner, rel, mode, trace);
    if (trace) {
      // Inner entries were recorded relative to the block input.
      for (std::size_t i = first; i < trace->size(); ++i) {
        auto& e = (*trace)[i];
        e.newest0 = st.newest0 + st.jump * e.newest0;
        e.jump *= st.jump;
      }
    }
    const ClipState sc = run_clip(r->shortcut, rel, mode, nullptr);
    const std::int64_t delay = path_delay(r->inner);
    const std::int64_t s_sc = sc.jump;
    ClipTensor y = inner.x;
    for (int j = 0; j < y.time(); ++j) {
      const std::int64_t q = inner.newest0 + j * inner.jump - delay;
      if (q < 0 || q % s_sc != 0 || q / s_sc >= sc.x.time()) {
        throw Error("layer '" + r->name + "': shortcut has no frame aligned with output " +
                    std::to_string(j) + " in this padding mode");
      }
      const int i = static_cast<int>(q / s_sc);
      for (int c = 0; c < y.channels(); ++c) {
        float* dst = y.plane_ptr(c, j);
        const float* src = sc.x.plane_ptr(c, i);
        for (std::size_t p = 0; p < y.plane(); ++p) dst[p] += src[p];
      }
    }
    out.x = std::move(y);
    out.newest0 = st.newest0 + st.jump * inner.newest0;
    out.jump = st.jump * inner.jump;
    return out;
  }

  const TemporalDims t = temporal_dims(layer);
  const auto [front, back] = temporal_pads(t, mode);
  std::visit(Overloaded{
                 [&](const ConvLayer& c) { out.x = conv3d_regular(x, c.conv, front, back); },
                 [&](const PoolLayer& p) { out.x = pool3d_regular(x, p.pool, front, back); },
                 [&](const GlobalPoolLayer& g) {
                   out.x = pool3d_regular(x, global_pool_spec(g, x.frame_shape()), 0, 0);
                 },
                 [&](const ActivationLayer& a) {
                   out.x = x;
                   activate_inplace(a.fn, out.x.data());
                 },
                 [&](const NormLayer& n) { out.x = norm_infer(x, n.norm); },
                 [&](const SeLayer& s) { out.x = se_block_clip(x, s.se); },
                 [&](const LinearLayer& l) {
                   out.x = ClipTensor(l.out_features, x.time(), x.height(), x.width());
                   linear_apply(l, x.data().data(), x.channel_stride(), out.x.data().data());
                 },
                 [&](const ResidualLayer&) {},
             },
             layer.op);
  const std::int64_t lead = kind_of(layer) == LayerKind::global_pool ? 0 : front;
  out.newest0 = st.newest0 + st.jump * (t.span() - lead);
  out.jump = st.jump * t.stride;
  return out;
}

ClipState run_clip(const std::vector<Layer>& layers, ClipState st, TemporalPadding mode,
                   std::vector<ClipTraceEntry>* trace) {
  for (const Layer& l : layers) {
    st = run_layer(l, std::move(st), mode, trace);
    if (trace) trace->push_back({name_of(l), st.x, st.newest0, st.jump});
  }
  return st;
}

}  // namespace

ClipResult forward_clip(const NetworkSpec& net, const ClipTensor& clip, TemporalPadding padding,
                        std::vector<ClipTraceEntry>* trace) {
  validate(net, true);
  if (clip.frame_shape() != net.input) {
    throw Error("clip frame shape " + to_string(clip.frame_shape()) +
                " does not match network input " + to_string(net.input));
  }
  if (padding == TemporalPadding::causal) {
    const ReceptiveSummary s = analyze(net);
    if (clip.time() < s.transient_len + 1) {
      throw Error("clip has " + std::to_string(clip.time()) + " frames but the network needs " +
                  std::to_string(s.transient_len + 1));
    }
  }
  ClipState st = run_clip(net.layers, ClipState{clip, 0, 1}, padding, trace);
  return {std::move(st.x), st.newest0, st.jump};
}

std::vector<float> forward_clip_last(const NetworkSpec& net, const ClipTensor& clip,
                                     TemporalPadding padding) {
  const ClipResult r = forward_clip(net, clip, padding);
  const FrameTensor last = r.output.frame(r.output.time() - 1);
  return {last.data().begin(), last.data().end()};
}

// Streaming execution.

namespace detail {

struct StepContext {
  std::int64_t step = 0;
  const StepTraceFn* trace = nullptr;
};

class Node {
 public:
  explicit Node(std::string name) : name_(std::move(name)) {}
  virtual ~Node() = default;

  virtual StepOutput step(FrameTensor&& x, const StepContext& ctx) = 0;
  virtual std::size_t state_floats() const { return 0; }
  virtual void reset() {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

}  // namespace detail

namespace {

using detail::Node;
using detail::StepContext;
using NodeList = std::vector<std::unique_ptr<Node>>;

StepOutput valid(FrameTensor&& x) {
  StepOutput out;
  out.value = std::move(x);
  out.valid = true;
  return out;
}

// Runs `x` through a node sequence, stopping at the first non-valid output.
StepOutput run_nodes(NodeList& nodes, FrameTensor&& x, const StepContext& ctx) {
  StepOutput cur = valid(std::move(x));
  for (auto& node : nodes) {
    cur = node->step(std::move(*cur.value), ctx);
    if (!cur.valid) return cur;
    if (ctx.trace && *ctx.trace) (*ctx.trace)(node->name(), ctx.step, *cur.value);
  }
  return cur;
}

class ConvNode : public Node {
 public:
  ConvNode(const ConvLayer& l, FrameShape in) : Node(l.name), spec_(l.conv), in_(in) {
    ConvNode::reset();
  }
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    return coconv_step(x, state_, spec_);
  }
  std::size_t state_floats() const override { return state_.floats(); }
  void reset() override { state_ = coconv_init(spec_, in_, InitScheme::zeros); }

 private:
  const ConvSpec& spec_;
  FrameShape in_;
  CoConvState state_;
};

class PoolNode : public Node {
 public:
  PoolNode(std::string name, PoolSpec spec, FrameShape in)
      : Node(std::move(name)), spec_(std::move(spec)), in_(in) {
    PoolNode::reset();
  }
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    return copool_step(x, state_, spec_);
  }
  std::size_t state_floats() const override { return state_.floats(); }
  void reset() override { state_ = copool_init(spec_, in_); }

 private:
  PoolSpec spec_;
  FrameShape in_;
  CoPoolState state_;
};

class ActivationNode : public Node {
 public:
  explicit ActivationNode(const ActivationLayer& l) : Node(l.name), fn_(l.fn) {}
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    activate_inplace(fn_, x.data());
    return valid(std::move(x));
  }

 private:
  Activation fn_;
};

class NormNode : public Node {
 public:
  explicit NormNode(const NormLayer& l) : Node(l.name), spec_(l.norm) {}
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    return valid(norm_infer(x, spec_));
  }

 private:
  const NormSpec& spec_;
};

class SeNode : public Node {
 public:
  explicit SeNode(const SeLayer& l) : Node(l.name), spec_(l.se) {
    if (spec_.temporal_pool) {
      throw Error("layer '" + l.name +
                  "': squeeze-excitation with temporal pooling has no streaming form; "
                  "convert the network first");
    }
  }
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    return valid(se_block_step(x, spec_));
  }

 private:
  const SeSpec& spec_;
};

class LinearNode : public Node {
 public:
  explicit LinearNode(const LinearLayer& l) : Node(l.name), layer_(l) {}
  StepOutput step(FrameTensor&& x, const StepContext&) override {
    if (x.channels() != layer_.in_features) throw Error("linear layer input mismatch");
    FrameTensor y({layer_.out_features, x.height(), x.width()});
    linear_apply(layer_, x.data().data(), x.shape().plane(), y.data().data());
    return valid(std::move(y));
  }

 private:
  const LinearLayer& layer_;
};

FrameShape build_nodes(const std::vector<Layer>& layers, FrameShape in, NodeList& out);

class ResidualNode : public Node {
 public:
  ResidualNode(const ResidualLayer& l, FrameShape in) : Node(l.name), in_(in) {
    build_nodes(l.inner, in, inner_);
    build_nodes(l.shortcut, in, shortcut_);
    delay_ = static_cast<int>(l.skip_delay ? *l.skip_delay : path_delay(l.inner));
    ResidualNode::reset();
  }

  StepOutput step(FrameTensor&& x, const StepContext& ctx) override {
    StepOutput skip = delay_step(x, line_);
    StepOutput a = run_nodes(inner_, std::move(x), ctx);
    StepOutput b;
    if (skip.valid) b = run_nodes(shortcut_, std::move(*skip.value), ctx);
    if (a.valid && b.valid) {
      auto dst = a.value->data();
      const auto src = b.value->data();
      if (dst.size() != src.size()) throw Error("residual path shapes differ");
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      steady_ = true;
      return a;
    }
    if (steady_ && a.valid != b.valid) {
      throw std::logic_error("residual block '" + name() +
                             "': inner and shortcut paths emitted on different steps");
    }
    return {};
  }

  std::size_t state_floats() const override {
    std::size_t n = line_.floats();
    for (const auto& node : inner_) n += node->state_floats();
    for (const auto& node : shortcut_) n += node->state_floats();
    return n;
  }

  void reset() override {
    line_ = delay_init(delay_, in_);
    for (auto& node : inner_) node->reset();
    for (auto& node : shortcut_) node->reset();
    steady_ = false;
  }

 private:
  FrameShape in_;
  NodeList inner_;
  NodeList shortcut_;
  int delay_ = 0;
  DelayLineState line_;
  bool steady_ = false;
};

FrameShape build_nodes(const std::vector<Layer>& layers, FrameShape in, NodeList& out) {
  for (const Layer& l : layers) {
    std::visit(Overloaded{
                   [&](const ConvLayer& c) { out.push_back(std::make_unique<ConvNode>(c, in)); },
                   [&](const PoolLayer& p) {
                     out.push_back(std::make_unique<PoolNode>(p.name, p.pool, in));
                   },
                   [&](const GlobalPoolLayer& g) {
                     out.push_back(std::make_unique<PoolNode>(g.name, global_pool_spec(g, in), in));
                   },
                   [&](const ActivationLayer& a) {
                     out.push_back(std::make_unique<ActivationNode>(a));
                   },
                   [&](const NormLayer& n) { out.push_back(std::make_unique<NormNode>(n)); },
                   [&](const SeLayer& s) { out.push_back(std::make_unique<SeNode>(s)); },
                   [&](const LinearLayer& l) { out.push_back(std::make_unique<LinearNode>(l)); },
                   [&](const ResidualLayer& r) {
                     out.push_back(std::make_unique<ResidualNode>(r, in));
                   },
               },
               l.op);
    in = layer_output_shape(l, in);
  }
  return in;
}

}  // namespace

CoNetwork::CoNetwork(NetworkSpec spec)
    : spec_(std::make_shared<const NetworkSpec>(std::move(spec))) {
  validate(*spec_, true);
  summary_ = analyze(*spec_);
  build_nodes(spec_->layers, spec_->input, nodes_);
}

CoNetwork::~CoNetwork() = default;
CoNetwork::CoNetwork(CoNetwork&&) noexcept = default;
CoNetwork& CoNetwork::operator=(CoNetwork&&) noexcept = default;

StepOutput CoNetwork::step(const FrameTensor& frame) {
  if (frame.shape() != spec_->input) {
    throw Error("frame shape " + to_string(frame.shape()) + " does not match network input " +
                to_string(spec_->input));
  }
  StepContext ctx{steps_, &trace_};
  StepOutput out = run_nodes(nodes_, FrameTensor(frame), ctx);
  ++steps_;
  if (!out.valid) return {};
  return out;
}

void CoNetwork::reset() {
  for (auto& node : nodes_) node->reset();
  steps_ = 0;
}

std::size_t CoNetwork::state_floats() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node->state_floats();
  return n;
}

CoNetwork stream_init(const NetworkSpec& net, InitScheme scheme, const FrameTensor* first_frame) {
  CoNetwork co(net);
  if (scheme == InitScheme::replicate) {
    if (first_frame == nullptr) throw Error("replicate initialisation requires a first frame");
    const std::int64_t n = co.summary().r_t - 1;
    for (std::int64_t i = 0; i < n; ++i) co.step(*first_frame);
    co.reset_counter();
  }
  return co;
}

StepOutput stream_step(CoNetwork& net, const FrameTensor& frame) { return net.step(frame); }

}  // namespace costream
