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

#include "costream/models.hpp"

namespace costream {

namespace {

struct Stage {
  const char* name;
  int width;
  int inner;
  int depth;
};

ConvLayer conv(std::string name, int cin, int cout, DimSpec t, DimSpec h, DimSpec w,
               int groups = 1) {
  ConvLayer c;
  c.name = std::move(name);
  c.conv.in_channels = cin;
  c.conv.out_channels = cout;
  c.conv.groups = groups;
  c.conv.temporal = t;
  c.conv.height = h;
  c.conv.width = w;
  return c;
}

ConvLayer pointwise(std::string name, int cin, int cout, int spatial_stride = 1) {
  const DimSpec s{1, spatial_stride, 1, 0};
  return conv(std::move(name), cin, cout, {}, s, s);
}

NormLayer norm(std::string name, int channels) {
  NormLayer n;
  n.name = std::move(name);
  n.norm.channels = channels;
  return n;
}

ActivationLayer act(std::string name, Activation fn) { return {std::move(name), fn}; }

ResidualLayer bottleneck(const std::string& name, int cin, int inner, int cout, bool first,
                         bool se) {
  const int stride = first ? 2 : 1;
  ResidualLayer r;
  r.name = name;
  r.inner.push_back(pointwise(name + ".conv_a", cin, inner));
  r.inner.push_back(norm(name + ".bn_a", inner));
  r.inner.push_back(act(name + ".relu_a", Activation::relu));
  r.inner.push_back(conv(name + ".conv_b", inner, inner, {3, 1, 1, 1}, {3, stride, 1, 1},
                         {3, stride, 1, 1}, inner));
  r.inner.push_back(norm(name + ".bn_b", inner));
  if (se) {
    SeLayer s;
    s.name = name + ".se";
    s.se.channels = inner;
    s.se.reduction = 16;
    s.se.temporal_pool = true;
    r.inner.push_back(s);
  }
  r.inner.push_back(act(name + ".swish", Activation::swish));
  r.inner.push_back(pointwise(name + ".conv_c", inner, cout));
  r.inner.push_back(norm(name + ".bn_c", cout));
  if (first) {
    r.shortcut.push_back(pointwise(name + ".proj", cin, cout, stride));
    r.shortcut.push_back(norm(name + ".proj_bn", cout));
  }
  return r;
}

}  // namespace

int x3d_clip_size(X3dSize size) { return size == X3dSize::s ? 13 : 16; }

NetworkSpec builtin_x3d(X3dSize size, const X3dOptions& options) {
  const int default_res = size == X3dSize::s ? 160 : size == X3dSize::m ? 224 : 312;
  const int res = options.resolution.value_or(default_res);
  const int pool_t = options.pool_temporal.value_or(x3d_clip_size(size));
  const bool large = size == X3dSize::l;
  const Stage stages[] = {
      {"res2", 24, 54, large ? 5 : 3},
      {"res3", 48, 108, large ? 10 : 5},
      {"res4", 96, 216, large ? 25 : 11},
      {"res5", 192, 432, large ? 15 : 7},
  };

  NetworkSpec net;
  net.input = {3, res, res};
  net.frame_rate = size == X3dSize::s ? 30.0 / 6.0 : 30.0 / 5.0;
  net.layers.push_back(conv("conv1.conv_s", 3, 24, {}, {3, 2, 1, 1}, {3, 2, 1, 1}));
  net.layers.push_back(conv("conv1.conv_t", 24, 24, {5, 1, 1, 2}, {}, {}, 24));
  net.layers.push_back(norm("conv1.bn", 24));
  net.layers.push_back(act("conv1.relu", Activation::relu));

  int channels = 24;
  for (const Stage& st : stages) {
    for (int b = 1; b <= st.depth; ++b) {
      const std::string block = std::string(st.name) + "." + std::to_string(b);
      // SE sits on every other block, starting with the first.
      net.layers.push_back(bottleneck(block, channels, st.inner, st.width, b == 1, b % 2 == 1));
      net.layers.push_back(act(block + ".relu", Activation::relu));
      channels = st.width;
    }
  }

  net.layers.push_back(pointwise("conv5.conv", channels, 432));
  net.layers.push_back(norm("conv5.bn", 432));
  net.layers.push_back(act("conv5.relu", Activation::relu));
  GlobalPoolLayer pool;
  pool.name = "pool5";
  pool.temporal_kernel = pool_t;
  net.layers.push_back(pool);
  LinearLayer fc1;
  fc1.name = "fc1";
  fc1.in_features = 432;
  fc1.out_features = 2048;
  fc1.has_bias = false;
  net.layers.push_back(fc1);
  net.layers.push_back(act("fc1.relu", Activation::relu));
  LinearLayer fc2;
  fc2.name = "fc2";
  fc2.in_features = 2048;
  fc2.out_features = options.num_classes;
  net.layers.push_back(fc2);
  return net;
}

std::optional<X3dSize> parse_x3d_name(const std::string& name) {
  if (name == "x3d-s") return X3dSize::s;
  if (name == "x3d-m") return X3dSize::m;
  if (name == "x3d-l") return X3dSize::l;
  return std::nullopt;
}

std::vector<std::string> builtin_names() { return {"x3d-s", "x3d-m", "x3d-l"}; }

}  // namespace costream
