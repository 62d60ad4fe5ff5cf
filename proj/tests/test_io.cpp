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

#include <random>
#include <sstream>

#include "costream/accounting.hpp"
#include "costream/io.hpp"
#include "costream/models.hpp"
#include "json.hpp"
#include "nets.hpp"

namespace {

using namespace costream;
using nlohmann::json;

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::map<std::string, std::vector<float>> params(const NetworkSpec& net) {
  std::map<std::string, std::vector<float>> m;
  for_each_parameter(net, [&](const std::string& n, const std::vector<int>&,
                              const std::vector<float>& v) { m[n] = v; });
  return m;
}

TEST(Spec, BuiltinRoundTrips) {
  for (const auto size : {X3dSize::s, X3dSize::m, X3dSize::l}) {
    const auto net = builtin_x3d(size);
    const std::string text = serialize_spec(net);
    EXPECT_EQ(serialize_spec(parse_spec(text)), text);
  }
  const auto co = convert_to_continual(builtin_x3d_s());
  const auto back = parse_spec(serialize_spec(co));
  EXPECT_TRUE(back.continual);
  EXPECT_EQ(analyze(back).r_t, analyze(co).r_t);
  EXPECT_EQ(memory_report(back, CostMode::continual).state_floats,
            memory_report(co, CostMode::continual).state_floats);
}

TEST(Spec, RandomNetworksRoundTrip) {
  std::mt19937 rng(4);
  for (int i = 0; i < 30; ++i) {
    const auto net = nets::random_network(rng);
    const std::string text = serialize_spec(net);
    EXPECT_EQ(serialize_spec(parse_spec(text)), text);
  }
}

TEST(Spec, UnknownFieldIsRejectedWithPath) {
  json doc = json::parse(serialize_spec(nets::toy_network()));
  doc["layers"][2]["inner"][0]["kernal"] = {3, 3, 3};
  const std::string msg = error_of([&] { parse_spec(doc.dump()); });
  EXPECT_NE(msg.find("kernal"), std::string::npos) << msg;
  EXPECT_NE(msg.find("layers[2].inner[0]"), std::string::npos) << msg;
  doc = json::parse(serialize_spec(nets::toy_network()));
  doc["colour"] = "blue";
  EXPECT_NE(error_of([&] { parse_spec(doc.dump()); }).find("colour"), std::string::npos);
}

TEST(Spec, MalformedDocumentsAreRejected) {
  const json good = json::parse(serialize_spec(nets::toy_network()));
  auto bad = [&](const std::function<void(json&)>& edit) {
    json d = good;
    edit(d);
    return error_of([&] { parse_spec(d.dump()); });
  };
  EXPECT_NE(bad([](json& d) { d["version"] = 99; }), "");
  EXPECT_NE(bad([](json& d) { d["layers"][0].erase("kernel"); }).find("kernel"), std::string::npos);
  EXPECT_NE(bad([](json& d) { d["layers"][0]["kernel"] = {3, 3}; }), "");
  EXPECT_NE(bad([](json& d) { d["layers"][0]["groups"] = "two"; }).find("groups"), std::string::npos);
  EXPECT_NE(bad([](json& d) { d["layers"][0]["type"] = "lstm"; }).find("lstm"), std::string::npos);
  EXPECT_NE(bad([](json& d) { d["layers"][1]["function"] = "gelu"; }).find("gelu"), std::string::npos);
  EXPECT_NE(bad([](json& d) { d["layers"][0]["in_channels"] = 4; }), "");
  EXPECT_NE(error_of([] { parse_spec("{not json"); }), "");
}

TEST(Weights, RoundTripIsBitExact) {
  auto net = builtin_x3d_s({32, std::nullopt, 10});
  randomize_parameters(net, 123);
  std::stringstream buf;
  write_weights(net, buf);
  auto other = builtin_x3d_s({32, std::nullopt, 10});
  const auto r = read_weights(buf, other);
  EXPECT_TRUE(r.missing.empty());
  EXPECT_EQ(params(net), params(other));
}

TEST(Weights, MissingEntriesComeFromSeed) {
  auto small = nets::network({2, 3, 3}, {nets::conv("a", 2, 2, nets::dim(1))});
  randomize_parameters(small, 1);
  std::stringstream buf;
  write_weights(small, buf);
  auto net = nets::network({2, 3, 3}, {nets::conv("a", 2, 2, nets::dim(1)), nets::norm("bn", 2)});
  const auto r = read_weights(buf, net, 42);
  EXPECT_EQ(r.missing, (std::vector<std::string>{"bn.bias", "bn.running_mean", "bn.running_var",
                                                 "bn.weight"}));
  auto seeded = net;
  randomize_parameters(seeded, 42);
  EXPECT_EQ(params(net).at("bn.running_var"), params(seeded).at("bn.running_var"));
  EXPECT_EQ(params(net).at("a.weight"), params(small).at("a.weight"));
}

class BrokenWeights : public ::testing::Test {
 protected:
  void SetUp() override {
    net = nets::network({2, 3, 3}, {nets::conv("a", 2, 3, nets::dim(3)), nets::conv("b", 3, 1, nets::dim(1))});
    randomize_parameters(net, 5);
    std::stringstream buf;
    write_weights(net, buf);
    std::getline(buf, header_text);
    header = json::parse(header_text);
    payload = buf.str().substr(header_text.size() + 1);
  }
  std::string load(const json& h, const std::string& p) {
    std::stringstream s(h.dump() + "\n" + p);
    auto copy = net;
    return error_of([&] { read_weights(s, copy); });
  }
  NetworkSpec net;
  std::string header_text;
  json header;
  std::string payload;
};

TEST_F(BrokenWeights, Intact) { EXPECT_EQ(load(header, payload), ""); }

TEST_F(BrokenWeights, Truncated) {
  const std::string msg = load(header, payload.substr(0, payload.size() - 3));
  EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
  EXPECT_NE(msg.find("b.bias"), std::string::npos) << msg;
}

TEST_F(BrokenWeights, TrailingBytes) { EXPECT_NE(load(header, payload + "xxxx"), ""); }

TEST_F(BrokenWeights, ShapeConflictNamesBothShapes) {
  json h = header;
  h["entries"][0]["shape"] = {3, 2, 1, 1, 3};
  const std::string msg = load(h, payload);
  EXPECT_NE(msg.find("a.weight"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[3, 2, 1, 1, 3]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[3, 2, 3, 1, 1]"), std::string::npos) << msg;
}

TEST_F(BrokenWeights, DuplicateAndUnknownEntries) {
  json h = header;
  h["entries"][1]["name"] = "a.weight";
  EXPECT_NE(load(h, payload).find("duplicate"), std::string::npos);
  h = header;
  h["entries"][1]["name"] = "z.bias";
  EXPECT_NE(load(h, payload).find("z.bias"), std::string::npos);
  h = header;
  h["entries"][0]["dtype"] = "f16";
  EXPECT_NE(load(h, payload), "");
}

TEST(Reports, FormatsCarryTheTotals) {
  const auto rep = memory_report(convert_to_continual(builtin_x3d_m()), CostMode::continual);
  const json j = json::parse(report_json(rep));
  EXPECT_EQ(j["totals"]["state_floats"].get<std::int64_t>(), rep.state_floats);
  EXPECT_EQ(j["totals"]["worst_case_floats"].get<std::int64_t>(), rep.worst_case_floats);
  EXPECT_EQ(j["rows"].size(), rep.rows.size());
  const std::string csv = report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "name,kind,flops_per_frame,flops_per_clip,elementwise_per_frame,elementwise_per_clip,"
            "state_floats,transient_floats,delay_frames,jump");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), std::ptrdiff_t(rep.rows.size() + 1));
  const std::string table = report_table(rep);
  EXPECT_NE(table.find("1,204,224"), std::string::npos);
  EXPECT_NE(table.find("state total"), std::string::npos);
  const json s = json::parse(summary_json(analyze(builtin_x3d_m())));
  EXPECT_EQ(s["r_t"], 72);
}

}  // namespace
