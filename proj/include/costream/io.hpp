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

#ifndef COSTREAM_IO_HPP_
#define COSTREAM_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "costream/accounting.hpp"
#include "costream/network.hpp"

namespace costream {

inline constexpr int kSpecVersion = 1;

// Strict parse of a network document; unknown fields are errors.
NetworkSpec parse_spec(const std::string& text);
std::string serialize_spec(const NetworkSpec& net, int indent = 2);

NetworkSpec load_spec_file(const std::string& path);
void save_spec_file(const NetworkSpec& net, const std::string& path);

// Weight files: one JSON header line listing {name, shape, dtype: "f32"}
// entries, a newline, then the little-endian float payloads in entry order.
void write_weights(const NetworkSpec& net, std::ostream& out);
void save_weights_file(const NetworkSpec& net, const std::string& path);

struct WeightLoadResult {
  std::vector<std::string> missing;  // initialised from `seed` instead
};

WeightLoadResult read_weights(std::istream& in, NetworkSpec& net, std::uint64_t seed = 0);
WeightLoadResult load_weights_file(const std::string& path, NetworkSpec& net,
                                   std::uint64_t seed = 0);

std::string report_json(const CostReport& report, int indent = 2);
// Columns: name,kind,flops_per_frame,flops_per_clip,elementwise_per_frame,
// elementwise_per_clip,state_floats,transient_floats,delay_frames,jump
std::string report_csv(const CostReport& report);
// Stage / layer / expression / floats, followed by totals.
std::string report_table(const CostReport& report);

std::string summary_json(const ReceptiveSummary& summary, int indent = 2);

}  // namespace costream

#endif  // COSTREAM_IO_HPP_
