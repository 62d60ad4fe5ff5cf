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

#include "costream/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace costream {

using nlohmann::json;

namespace {

// Shortest decimal that reads back as the same float.
double decimal(float v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::stod(std::string(buf, end));
}

// Field access with path-qualified errors and unknown-key rejection.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(path_ + ": expected an object");
  }

  template <typename T>
  T get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw Error(path_ + ": missing field '" + key + "'");
    return convert<T>(*it, key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return fallback;
    return convert<T>(*it, key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw Error(path_ + ": missing field '" + key + "'");
    return *it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw Error(path_ + ": unknown field '" + it.key() + "'");
    }
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw Error("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw Error("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw Error(path_ + ": field '" + key + "' has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<int> int_list(Reader& r, const std::string& key, std::size_t n,
                          std::vector<int> fallback) {
  if (!r.has(key)) {
    if (fallback.empty()) throw Error(r.path() + ": missing field '" + key + "'");
    return fallback;
  }
  const json& v = r.raw(key);
  if (!v.is_array() || v.size() != n) {
    throw Error(r.path() + ": field '" + key + "' must be a list of " + std::to_string(n) +
                " integers");
  }
  std::vector<int> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) throw Error(r.path() + ": field '" + key + "' must hold integers");
    out.push_back(e.get<int>());
  }
  return out;
}

Activation parse_activation(const std::string& s, const std::string& path) {
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw Error(path + ": unknown activation '" + s + "'");
}

PoolKind parse_pool_kind(const std::string& s, const std::string& path) {
  if (s == "avg") return PoolKind::avg;
  if (s == "max") return PoolKind::max;
  throw Error(path + ": unknown pooling mode '" + s + "'");
}

void set_dims(DimSpec& t, DimSpec& h, DimSpec& w, const std::vector<int>& k,
              const std::vector<int>& s, const std::vector<int>& d, const std::vector<int>& p) {
  t = {k[0], s[0], d[0], p[0]};
  h = {k[1], s[1], d[1], p[1]};
  w = {k[2], s[2], d[2], p[2]};
}

std::vector<Layer> parse_layers(const json& arr, const std::string& path);

Layer parse_layer(const json& j, const std::string& path) {
  Reader r(j, path);
  const std::string type = r.get<std::string>("type");
  const std::string name = r.get<std::string>("name");
  const std::string here = path + " ('" + name + "')";
  Layer out;
  if (type == "conv3d") {
    ConvLayer c;
    c.name = name;
    c.conv.in_channels = r.get<int>("in_channels");
    c.conv.out_channels = r.get<int>("out_channels");
    c.conv.groups = r.get_or<int>("groups", 1);
    const auto k = int_list(r, "kernel", 3, {});
    set_dims(c.conv.temporal, c.conv.height, c.conv.width, k,
             int_list(r, "stride", 3, {1, 1, 1}), int_list(r, "dilation", 3, {1, 1, 1}),
             int_list(r, "padding", 3, {0, 0, 0}));
    c.conv.has_bias = r.get_or<bool>("bias", false);
    out = c;
  } else if (type == "pool") {
    PoolLayer p;
    p.name = name;
    p.pool.kind = parse_pool_kind(r.get<std::string>("mode"), here);
    const auto k = int_list(r, "kernel", 3, {});
    set_dims(p.pool.temporal, p.pool.height, p.pool.width, k,
             int_list(r, "stride", 3, {1, 1, 1}), int_list(r, "dilation", 3, {1, 1, 1}),
             int_list(r, "padding", 3, {0, 0, 0}));
    out = p;
  } else if (type == "global_pool") {
    GlobalPoolLayer g;
    g.name = name;
    g.kind = parse_pool_kind(r.get_or<std::string>("mode", "avg"), here);
    g.temporal_kernel = r.get<int>("temporal_kernel");
    out = g;
  } else if (type == "activation") {
    ActivationLayer a;
    a.name = name;
    a.fn = parse_activation(r.get<std::string>("function"), here);
    out = a;
  } else if (type == "norm") {
    NormLayer n;
    n.name = name;
    n.norm.channels = r.get<int>("channels");
    n.norm.epsilon = r.get_or<float>("epsilon", 1e-5f);
    out = n;
  } else if (type == "se") {
    SeLayer s;
    s.name = name;
    s.se.channels = r.get<int>("channels");
    s.se.reduction = r.get_or<int>("reduction", 16);
    s.se.activation = parse_activation(r.get_or<std::string>("activation", "relu"), here);
    s.se.temporal_pool = r.get_or<bool>("temporal_pool", false);
    out = s;
  } else if (type == "linear") {
    LinearLayer l;
    l.name = name;
    l.in_features = r.get<int>("in_features");
    l.out_features = r.get<int>("out_features");
    l.has_bias = r.get_or<bool>("bias", true);
    out = l;
  } else if (type == "residual") {
    ResidualLayer res;
    res.name = name;
    res.inner = parse_layers(r.raw("inner"), path + ".inner");
    if (r.has("shortcut")) res.shortcut = parse_layers(r.raw("shortcut"), path + ".shortcut");
    if (r.has("skip_delay")) res.skip_delay = r.get<int>("skip_delay");
    out = res;
  } else {
    throw Error(here + ": unknown layer type '" + type + "'");
  }
  r.finish();
  return out;
}

std::vector<Layer> parse_layers(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw Error(path + ": expected a list of layers");
  std::vector<Layer> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_layer(arr[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json dims_json(const DimSpec& t, const DimSpec& h, const DimSpec& w, int DimSpec::*field) {
  return json::array({t.*field, h.*field, w.*field});
}

std::string activation_name(Activation a) { return to_string(a); }

json layers_json(const std::vector<Layer>& layers);

json layer_json(const Layer& layer) {
  json j;
  std::visit(
      [&](const auto& l) {
        using T = std::remove_cvref_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvLayer>) {
          const ConvSpec& c = l.conv;
          j = {{"type", "conv3d"},
               {"name", l.name},
               {"in_channels", c.in_channels},
               {"out_channels", c.out_channels},
               {"groups", c.groups},
               {"kernel", dims_json(c.temporal, c.height, c.width, &DimSpec::kernel)},
               {"stride", dims_json(c.temporal, c.height, c.width, &DimSpec::stride)},
               {"dilation", dims_json(c.temporal, c.height, c.width, &DimSpec::dilation)},
               {"padding", dims_json(c.temporal, c.height, c.width, &DimSpec::padding)},
               {"bias", c.has_bias}};
        } else if constexpr (std::is_same_v<T, PoolLayer>) {
          const PoolSpec& p = l.pool;
          j = {{"type", "pool"},
               {"name", l.name},
               {"mode", to_string(p.kind)},
               {"kernel", dims_json(p.temporal, p.height, p.width, &DimSpec::kernel)},
               {"stride", dims_json(p.temporal, p.height, p.width, &DimSpec::stride)},
               {"dilation", dims_json(p.temporal, p.height, p.width, &DimSpec::dilation)},
               {"padding", dims_json(p.temporal, p.height, p.width, &DimSpec::padding)}};
        } else if constexpr (std::is_same_v<T, GlobalPoolLayer>) {
          j = {{"type", "global_pool"},
               {"name", l.name},
               {"mode", to_string(l.kind)},
               {"temporal_kernel", l.temporal_kernel}};
        } else if constexpr (std::is_same_v<T, ActivationLayer>) {
          j = {{"type", "activation"}, {"name", l.name}, {"function", activation_name(l.fn)}};
        } else if constexpr (std::is_same_v<T, NormLayer>) {
          j = {{"type", "norm"},
               {"name", l.name},
               {"channels", l.norm.channels},
               {"epsilon", decimal(l.norm.epsilon)}};
        } else if constexpr (std::is_same_v<T, SeLayer>) {
          j = {{"type", "se"},
               {"name", l.name},
               {"channels", l.se.channels},
               {"reduction", l.se.reduction},
               {"activation", activation_name(l.se.activation)},
               {"temporal_pool", l.se.temporal_pool}};
        } else if constexpr (std::is_same_v<T, LinearLayer>) {
          j = {{"type", "linear"},
               {"name", l.name},
               {"in_features", l.in_features},
               {"out_features", l.out_features},
               {"bias", l.has_bias}};
        } else if constexpr (std::is_same_v<T, ResidualLayer>) {
          j = {{"type", "residual"},
               {"name", l.name},
               {"inner", layers_json(l.inner)},
               {"shortcut", layers_json(l.shortcut)}};
          if (l.skip_delay) j["skip_delay"] = *l.skip_delay;
        }
      },
      layer.op);
  return j;
}

json layers_json(const std::vector<Layer>& layers) {
  json arr = json::array();
  for (const Layer& l : layers) arr.push_back(layer_json(l));
  return arr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void to_little_endian(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : v) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
}

}  // namespace

NetworkSpec parse_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("spec is not valid JSON: ") + e.what());
  }
  Reader r(doc, "spec");
  const int version = r.get<int>("version");
  if (version != kSpecVersion) throw Error("unsupported spec version " + std::to_string(version));
  NetworkSpec net;
  {
    Reader in(r.raw("input"), "spec.input");
    net.input = {in.get<int>("channels"), in.get<int>("height"), in.get<int>("width")};
    in.finish();
  }
  net.frame_rate = r.get_or<double>("frame_rate", 0.0);
  net.continual = r.get_or<bool>("continual", false);
  net.layers = parse_layers(r.raw("layers"), "spec.layers");
  r.finish();
  validate(net);
  return net;
}

std::string serialize_spec(const NetworkSpec& net, int indent) {
  json doc = {{"version", kSpecVersion},
              {"input",
               {{"channels", net.input.channels},
                {"height", net.input.height},
                {"width", net.input.width}}},
              {"frame_rate", net.frame_rate},
              {"continual", net.continual},
              {"layers", layers_json(net.layers)}};
  return doc.dump(indent) + "\n";
}

NetworkSpec load_spec_file(const std::string& path) {
  try {
    return parse_spec(read_file(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void save_spec_file(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << serialize_spec(net);
}

void write_weights(const NetworkSpec& net, std::ostream& out) {
  json entries = json::array();
  for_each_parameter(net, [&](const std::string& name, const std::vector<int>& shape,
                              const std::vector<float>& values) {
    if (values.size() != shape_count(shape)) {
      throw Error("parameter '" + name + "' is not allocated");
    }
    entries.push_back({{"name", name}, {"shape", shape}, {"dtype", "f32"}});
  });
  out << json{{"entries", entries}}.dump() << "\n";
  for_each_parameter(net, [&](const std::string&, const std::vector<int>&,
                              const std::vector<float>& values) {
    std::vector<float> le = values;
    to_little_endian(le);
    out.write(reinterpret_cast<const char*>(le.data()),
              static_cast<std::streamsize>(le.size() * sizeof(float)));
  });
  if (!out) throw Error("failed writing weights");
}

void save_weights_file(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_weights(net, out);
}

WeightLoadResult read_weights(std::istream& in, NetworkSpec& net, std::uint64_t seed) {
  std::string header;
  if (!std::getline(in, header)) throw Error("weight file has no header line");
  json doc;
  try {
    doc = json::parse(header);
  } catch (const json::parse_error& e) {
    throw Error(std::string("weight header is not valid JSON: ") + e.what());
  }
  Reader r(doc, "weights");
  const json& entries = r.raw("entries");
  r.finish();
  if (!entries.is_array()) throw Error("weights: 'entries' must be a list");

  struct Entry {
    std::string name;
    std::vector<int> shape;
  };
  std::vector<Entry> list;
  std::set<std::string> names;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Reader e(entries[i], "weights.entries[" + std::to_string(i) + "]");
    Entry ent;
    ent.name = e.get<std::string>("name");
    const json& shape = e.raw("shape");
    if (!shape.is_array()) throw Error(e.path() + ": 'shape' must be a list");
    for (const json& d : shape) {
      if (!d.is_number_integer() || d.get<int>() < 1) {
        throw Error(e.path() + ": 'shape' must hold positive integers");
      }
      ent.shape.push_back(d.get<int>());
    }
    if (e.get<std::string>("dtype") != "f32") throw Error(e.path() + ": dtype must be f32");
    e.finish();
    if (!names.insert(ent.name).second) throw Error("duplicate weight entry '" + ent.name + "'");
    list.push_back(std::move(ent));
  }

  std::map<std::string, std::pair<std::vector<int>, std::vector<float>*>> params;
  allocate_parameters(net);
  for_each_parameter(net, [&](const std::string& name, const std::vector<int>& shape,
                              std::vector<float>& values) { params[name] = {shape, &values}; });

  std::set<std::string> loaded;
  for (const Entry& ent : list) {
    auto it = params.find(ent.name);
    if (it == params.end()) throw Error("weight entry '" + ent.name + "' matches no layer");
    if (it->second.first != ent.shape) {
      throw Error("weight entry '" + ent.name + "' has shape " + shape_string(ent.shape) +
                  " but the layer expects " + shape_string(it->second.first));
    }
    std::vector<float>& dst = *it->second.second;
    const std::size_t bytes = dst.size() * sizeof(float);
    in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
      throw Error("weight payload truncated in entry '" + ent.name + "'");
    }
    to_little_endian(dst);
    loaded.insert(ent.name);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("weight payload is longer than its header declares");
  }

  WeightLoadResult result;
  NetworkSpec fallback;
  bool have_fallback = false;
  std::map<std::string, std::vector<float>> defaults;
  for (const auto& [name, p] : params) {
    if (loaded.count(name)) continue;
    if (!have_fallback) {
      fallback = net;
      randomize_parameters(fallback, seed);
      for_each_parameter(fallback, [&](const std::string& n, const std::vector<int>&,
                                       std::vector<float>& v) { defaults[n] = v; });
      have_fallback = true;
    }
    *p.second = defaults[name];
    result.missing.push_back(name);
  }
  return result;
}

WeightLoadResult load_weights_file(const std::string& path, NetworkSpec& net, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return read_weights(in, net, seed);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string report_json(const CostReport& rep, int indent) {
  json rows = json::array();
  for (const CostRow& r : rep.rows) {
    rows.push_back({{"name", r.name},
                    {"kind", to_string(r.kind)},
                    {"flops_per_frame", r.flops_per_frame},
                    {"flops_per_clip", r.flops_per_clip},
                    {"elementwise_per_frame", r.elementwise_per_frame},
                    {"elementwise_per_clip", r.elementwise_per_clip},
                    {"state_floats", r.state_floats},
                    {"transient_floats", r.transient_floats},
                    {"delay_frames", r.delay_frames},
                    {"jump", r.jump}});
  }
  json doc = {{"mode", to_string(rep.mode)},
              {"clip_size", rep.clip_size},
              {"convention", {{"mac_as", rep.convention.mac_as},
                              {"count_bias", rep.convention.count_bias}}},
              {"totals",
               {{"flops_per_frame", rep.flops_per_frame},
                {"flops_per_clip", rep.flops_per_clip},
                {"elementwise_per_frame", rep.elementwise_per_frame},
                {"elementwise_per_clip", rep.elementwise_per_clip},
                {"state_floats", rep.state_floats},
                {"max_transient_floats", rep.max_transient_floats},
                {"max_transient_layer", rep.max_transient_layer},
                {"frame_cache_floats", rep.frame_cache_floats},
                {"worst_case_floats", rep.worst_case_floats},
                {"delay_frames", rep.delay_frames},
                {"residual_fraction", residual_fraction(rep)},
                {"pool_state_fraction", pool_state_fraction(rep)}}},
              {"rows", rows}};
  return doc.dump(indent) + "\n";
}

std::string report_csv(const CostReport& rep) {
  std::ostringstream out;
  out << "name,kind,flops_per_frame,flops_per_clip,elementwise_per_frame,elementwise_per_clip,"
         "state_floats,transient_floats,delay_frames,jump\n";
  out << std::setprecision(17);
  for (const CostRow& r : rep.rows) {
    out << r.name << ',' << to_string(r.kind) << ',' << r.flops_per_frame << ','
        << r.flops_per_clip << ',' << r.elementwise_per_frame << ',' << r.elementwise_per_clip
        << ',' << r.state_floats << ',' << r.transient_floats << ',' << r.delay_frames << ','
        << r.jump << '\n';
  }
  return out.str();
}

namespace {

std::string grouped(std::int64_t n) {
  std::string digits = std::to_string(n < 0 ? -n : n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return n < 0 ? "-" + out : out;
}

}  // namespace

std::string report_table(const CostReport& rep) {
  std::ostringstream out;
  out << std::left;
  if (rep.mode == CostMode::continual) {
    out << std::setw(8) << "stage" << std::setw(16) << "layer" << std::setw(44) << "expression"
        << std::right << std::setw(14) << "floats" << std::left << "\n";
    std::string last_stage;
    for (const GroupedRow& g : group_state_rows(rep)) {
      out << std::setw(8) << (g.stage == last_stage ? "" : g.stage) << std::setw(16) << g.label
          << std::setw(44) << g.expression << std::right << std::setw(14) << grouped(g.floats)
          << std::left << "\n";
      last_stage = g.stage;
    }
    out << std::setw(68) << "state total" << std::right << std::setw(14)
        << grouped(rep.state_floats) << std::left << "\n";
  } else {
    out << std::setw(68) << "frame cache" << std::right << std::setw(14)
        << grouped(rep.frame_cache_floats) << std::left << "\n";
  }
  out << std::setw(68) << "largest transient (" + rep.max_transient_layer + ")" << std::right
      << std::setw(14) << grouped(rep.max_transient_floats) << std::left << "\n";
  out << std::setw(68) << "worst case" << std::right << std::setw(14)
      << grouped(rep.worst_case_floats) << std::left << "\n";
  out << std::fixed << std::setprecision(4);
  out << "flops per frame " << rep.flops_per_frame / 1e9 << " G, per clip of "
      << rep.clip_size << " " << rep.flops_per_clip / 1e9 << " G\n";
  if (rep.mode == CostMode::continual) {
    out << "residual share " << residual_fraction(rep) << ", pooling share "
        << pool_state_fraction(rep) << ", delay " << rep.delay_frames << " frames\n";
  }
  return out.str();
}

std::string summary_json(const ReceptiveSummary& s, int indent) {
  json doc = {{"r_t", s.r_t},
              {"p_t", s.p_t},
              {"transient_len", s.transient_len},
              {"total_delay", s.total_delay},
              {"output_stride", s.output_stride}};
  return doc.dump(indent) + "\n";
}

}  // namespace costream
