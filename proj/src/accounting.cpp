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

#include "costream/accounting.hpp"

#include <algorithm>
#include <cstdlib>

namespace costream {

namespace {

std::string dims(const FrameShape& s) {
  return std::to_string(s.channels) + " x " + std::to_string(s.height) + " x " +
         std::to_string(s.width);
}

std::string window_factor(const TemporalDims& t) {
  std::string f = "(" + std::to_string(t.kernel) + "-1)";
  if (t.dilation != 1) f = std::to_string(t.dilation) + " x " + f;
  return f;
}

// Delay of a residual inner path, spelled out when a single layer causes it.
std::string delay_factor(const ResidualLayer& r, std::int64_t delay) {
  int count = 0;
  TemporalDims found;
  for (const Layer& l : r.inner) {
    if (std::holds_alternative<ResidualLayer>(l.op)) return "(" + std::to_string(delay) + ")";
    const TemporalDims t = temporal_dims(l);
    if (t.kernel > 1) {
      found = t;
      ++count;
    }
  }
  if (count == 1 && found.dilation == 1 && found.delay() == delay) {
    return "(" + std::to_string(found.kernel) + "-1-" + std::to_string(found.padding) + ")";
  }
  return "(" + std::to_string(delay) + ")";
}

double pointwise_flops(int cin, int cout, bool bias, double positions, const FlopConvention& c) {
  const double b = c.count_bias && bias ? 1.0 : 0.0;
  return c.mac_as * (1.0 + b) * cin * cout * positions;
}

GlobalPoolLayer* find_last_global_pool(std::vector<Layer>& layers) {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (auto* g = std::get_if<GlobalPoolLayer>(&it->op)) return g;
    if (auto* r = std::get_if<ResidualLayer>(&it->op)) {
      if (auto* g = find_last_global_pool(r->inner)) return g;
    }
  }
  return nullptr;
}

struct Walker {
  CostMode mode;
  FlopConvention conv;
  std::vector<CostRow>& rows;

  // Returns the clip-wise temporal length after the layers.
  int walk(const std::vector<Layer>& layers, FrameShape in, int t, std::int64_t& jump) {
    for (const Layer& l : layers) {
      const FrameShape out = layer_output_shape(l, in);
      CostRow row;
      row.name = name_of(l);
      row.kind = kind_of(l);
      row.jump = jump;
      const double in_n = static_cast<double>(in.numel());
      const double out_n = static_cast<double>(out.numel());
      int t_out = t;
      std::int64_t stride = 1;
      std::size_t row_index = rows.size();
      rows.push_back({});

      if (const auto* r = std::get_if<ResidualLayer>(&l.op)) {
        const std::int64_t delay = r->skip_delay ? *r->skip_delay : path_delay(r->inner);
        std::int64_t inner_jump = jump;
        t_out = walk(r->inner, in, t, inner_jump);
        std::int64_t sc_jump = jump;
        walk(r->shortcut, in, t, sc_jump);
        stride = inner_jump / jump;
        row.delay_frames = delay;
        row.elementwise_per_frame = out_n;
        row.elementwise_per_clip = out_n * t_out;
        if (mode == CostMode::continual) {
          row.state_floats = delay * static_cast<std::int64_t>(in.numel());
          row.state_expression = delay_factor(*r, delay) + " x " + dims(in);
        }
      } else {
        const TemporalDims td = temporal_dims(l);
        stride = td.stride;
        row.delay_frames = td.delay();
        if (row.kind != LayerKind::global_pool) {
          const DimSpec d{td.kernel, td.stride, td.dilation, td.padding};
          if (t > 0 && t + 2 * d.padding > d.span()) {
            t_out = output_size(t, d);
          } else if (mode == CostMode::clip) {
            throw Error("a clip of " + std::to_string(t) + " frames is too short for layer '" +
                        row.name + "'");
          } else {
            t_out = 0;
          }
        } else {
          t_out = 1;
        }
        std::visit(
            [&](const auto& layer) {
              using T = std::remove_cvref_t<decltype(layer)>;
              if constexpr (std::is_same_v<T, ConvLayer>) {
                row.flops_per_frame = conv_flops_frame(layer.conv, out, conv);
                row.flops_per_clip = conv_flops_clip(layer.conv, out, t_out, conv);
                if (mode == CostMode::continual && td.span() > 0) {
                  row.state_floats = td.span() * static_cast<std::int64_t>(out.numel());
                  row.state_expression = window_factor(td) + " x " + dims(out);
                }
              } else if constexpr (std::is_same_v<T, PoolLayer>) {
                const double kvol = static_cast<double>(td.kernel) * layer.pool.height.kernel *
                                    layer.pool.width.kernel;
                row.flops_per_frame = kvol * out_n;
                row.flops_per_clip = kvol * out_n * t_out;
                if (mode == CostMode::continual && td.kernel > 1) {
                  row.state_floats = (td.kernel - 1) * static_cast<std::int64_t>(out.numel());
                  row.state_expression = window_factor(td) + " x " + dims(out);
                }
              } else if constexpr (std::is_same_v<T, GlobalPoolLayer>) {
                row.flops_per_frame = static_cast<double>(layer.temporal_kernel) * in_n;
                row.flops_per_clip = static_cast<double>(t) * in_n;
                if (mode == CostMode::continual && layer.temporal_kernel > 1) {
                  row.state_floats =
                      (layer.temporal_kernel - 1) * static_cast<std::int64_t>(out.numel());
                  row.state_expression = window_factor(td) + " x " + std::to_string(out.channels);
                }
              } else if constexpr (std::is_same_v<T, ActivationLayer> ||
                                   std::is_same_v<T, NormLayer>) {
                row.elementwise_per_frame = out_n;
                row.elementwise_per_clip = out_n * t_out;
              } else if constexpr (std::is_same_v<T, SeLayer>) {
                const int c = layer.se.channels;
                const int h = layer.se.hidden();
                const double gate = pointwise_flops(c, h, true, 1.0, conv) +
                                    pointwise_flops(h, c, true, 1.0, conv);
                row.flops_per_frame = gate;
                row.flops_per_clip = layer.se.temporal_pool ? gate : gate * t_out;
                // Squeeze and scale.
                row.elementwise_per_frame = 2.0 * out_n;
                row.elementwise_per_clip = 2.0 * out_n * t_out;
              } else if constexpr (std::is_same_v<T, LinearLayer>) {
                const double positions = static_cast<double>(out.height) * out.width;
                row.flops_per_frame = pointwise_flops(layer.in_features, layer.out_features,
                                                      layer.has_bias, positions, conv);
                row.flops_per_clip = row.flops_per_frame * t_out;
              }
            },
            l.op);
      }

      row.transient_floats = static_cast<std::int64_t>(out.numel()) *
                             (mode == CostMode::clip ? t_out : 1);
      rows[row_index] = std::move(row);
      jump *= stride;
      in = out;
      t = t_out;
    }
    return t;
  }
};

// "res2.3.conv_b" -> ("res2", 3, "conv_b"); index 0 when there is no block.
struct NameParts {
  std::string stage;
  int index = 0;
  std::string rest;
};

NameParts split_name(const std::string& name) {
  NameParts p;
  const auto dot = name.find('.');
  p.stage = name.substr(0, dot);
  if (dot == std::string::npos) return p;
  std::string tail = name.substr(dot + 1);
  const auto dot2 = tail.find('.');
  const std::string first = tail.substr(0, dot2);
  if (!first.empty() && std::all_of(first.begin(), first.end(), ::isdigit)) {
    p.index = std::atoi(first.c_str());
    p.rest = dot2 == std::string::npos ? "" : tail.substr(dot2 + 1);
  } else {
    p.rest = tail;
  }
  return p;
}

}  // namespace

double conv_flops_frame(const ConvSpec& spec, const FrameShape& out, const FlopConvention& c) {
  const double kvol = static_cast<double>(spec.temporal.kernel) * spec.height.kernel *
                      spec.width.kernel;
  const double b = c.count_bias && spec.has_bias ? 1.0 : 0.0;
  return c.mac_as * (kvol + b) * (spec.in_channels / spec.groups) * spec.out_channels *
         out.height * out.width;
}

double conv_flops_clip(const ConvSpec& spec, const FrameShape& out, int n_t,
                       const FlopConvention& c) {
  return conv_flops_frame(spec, out, c) * n_t;
}

CostReport memory_report(const NetworkSpec& original, CostMode mode, std::optional<int> clip_size,
                         const FlopConvention& conv) {
  if (conv.mac_as != 1 && conv.mac_as != 2) throw Error("a MAC counts as 1 or 2 FLOPs");
  if (clip_size && *clip_size < 1) throw Error("clip size must be >= 1");
  NetworkSpec net = original;
  GlobalPoolLayer* gp = find_last_global_pool(net.layers);
  if (mode == CostMode::continual && clip_size) {
    if (gp == nullptr) throw Error("clip size given but the network has no global pool");
    gp->temporal_kernel = *clip_size;
  }
  validate(net);

  CostReport rep;
  rep.mode = mode;
  rep.convention = conv;
  rep.clip_size = clip_size.value_or(gp ? gp->temporal_kernel : 1);

  Walker w{mode, conv, rep.rows};
  std::int64_t jump = 1;
  w.walk(net.layers, net.input, rep.clip_size, jump);

  for (const CostRow& r : rep.rows) {
    rep.flops_per_frame += r.flops_per_frame / static_cast<double>(r.jump);
    rep.flops_per_clip += r.flops_per_clip;
    rep.elementwise_per_frame += r.elementwise_per_frame / static_cast<double>(r.jump);
    rep.elementwise_per_clip += r.elementwise_per_clip;
    rep.state_floats += r.state_floats;
    if (r.transient_floats > rep.max_transient_floats) {
      rep.max_transient_floats = r.transient_floats;
      rep.max_transient_layer = r.name;
    }
  }
  if (mode == CostMode::clip) {
    rep.frame_cache_floats =
        static_cast<std::int64_t>(net.input.numel()) * (rep.clip_size - 1);
  }
  rep.worst_case_floats = rep.state_floats + rep.max_transient_floats + rep.frame_cache_floats;
  rep.delay_frames = analyze(net).total_delay;
  return rep;
}

double residual_fraction(const CostReport& report) {
  if (report.state_floats == 0) return 0.0;
  std::int64_t n = 0;
  for (const CostRow& r : report.rows) {
    if (r.kind == LayerKind::residual) n += r.state_floats;
  }
  return static_cast<double>(n) / static_cast<double>(report.state_floats);
}

double pool_state_fraction(const CostReport& report) {
  if (report.state_floats == 0) return 0.0;
  std::int64_t n = 0;
  for (const CostRow& r : report.rows) {
    if (r.kind == LayerKind::pool || r.kind == LayerKind::global_pool) n += r.state_floats;
  }
  return static_cast<double>(n) / static_cast<double>(report.state_floats);
}

std::vector<GroupedRow> group_state_rows(const CostReport& report) {
  struct Item {
    NameParts parts;
    std::string label;
    const CostRow* row;
  };
  std::vector<std::string> stages;
  std::vector<std::vector<Item>> by_stage;
  for (const CostRow& r : report.rows) {
    if (r.state_floats == 0) continue;
    Item it{split_name(r.name), "", &r};
    if (r.kind == LayerKind::residual) {
      it.label = "residual";
    } else if (it.parts.index > 0) {
      it.label = r.kind == LayerKind::conv3d ? "conv" : to_string(r.kind);
    } else {
      it.label = it.parts.rest.empty() ? "-" : it.parts.rest;
    }
    auto pos = std::find(stages.begin(), stages.end(), it.parts.stage);
    if (pos == stages.end()) {
      stages.push_back(it.parts.stage);
      by_stage.emplace_back();
      pos = stages.end() - 1;
    }
    by_stage[pos - stages.begin()].push_back(it);
  }

  std::vector<GroupedRow> out;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    // Labels in order of first appearance.
    std::vector<std::string> labels;
    for (const Item& it : by_stage[s]) {
      if (std::find(labels.begin(), labels.end(), it.label) == labels.end()) {
        labels.push_back(it.label);
      }
    }
    for (const std::string& label : labels) {
      std::vector<const Item*> items;
      for (const Item& it : by_stage[s]) {
        if (it.label == label) items.push_back(&it);
      }
      std::size_t i = 0;
      while (i < items.size()) {
        std::size_t j = i + 1;
        while (j < items.size() && items[i]->parts.index > 0 &&
               items[j]->parts.index == items[j - 1]->parts.index + 1 &&
               items[j]->row->state_floats == items[i]->row->state_floats &&
               items[j]->row->state_expression == items[i]->row->state_expression) {
          ++j;
        }
        GroupedRow g;
        g.stage = stages[s];
        g.label = label;
        const std::size_t n = j - i;
        if (items[i]->parts.index > 0) {
          g.label += "_" + std::to_string(items[i]->parts.index);
          if (n > 1) g.label += "-" + std::to_string(items[j - 1]->parts.index);
        }
        g.expression = items[i]->row->state_expression;
        if (n > 1) g.expression = "[" + g.expression + "] x " + std::to_string(n);
        for (std::size_t k = i; k < j; ++k) g.floats += items[k]->row->state_floats;
        out.push_back(std::move(g));
        i = j;
      }
    }
  }
  return out;
}

std::string to_string(CostMode mode) { return mode == CostMode::clip ? "clip" : "continual"; }

}  // namespace costream
