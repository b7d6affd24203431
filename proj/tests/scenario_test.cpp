// Copyright 2026 The dtoffload Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <algorithm>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dtoffload/scenario.hpp"

namespace dtoff {
namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

TEST(Generator, DefaultsGiveTableScale) {
  const Scenario s = generate_random(7, GeneratorConfig{});
  EXPECT_EQ(s.num_devices(), 120);
  EXPECT_EQ(s.num_dts, 15);
  EXPECT_EQ(s.num_edge(), 3);
  EXPECT_EQ(s.num_servers_total, 4);
  EXPECT_EQ(s.cloud_index(), 3);
  EXPECT_DOUBLE_EQ(s.servers.cloud_clock_speed, 3.5);
  for (double f : s.servers.edge_clock_speeds) {
    EXPECT_GE(f, 1.8);
    EXPECT_LE(f, 3.0);
  }
  for (double w : s.devices.workloads) {
    EXPECT_GE(w, 80.0);
    EXPECT_LE(w, 320.0);
  }
  for (const auto& p : s.devices.locations) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, 1000.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LE(p.y, 800.0);
  }
  for (double b : s.devices.bandwidths) EXPECT_DOUBLE_EQ(b, 1000.0);
  EXPECT_TRUE(validate(s).empty());
}

TEST(Generator, SameSeedSameScenario) {
  EXPECT_EQ(generate_random(7, GeneratorConfig{}), generate_random(7, GeneratorConfig{}));
  EXPECT_NE(generate_random(7, GeneratorConfig{}), generate_random(8, GeneratorConfig{}));
}

TEST(Generator, ServerPoolSharedAcrossSeeds) {
  GeneratorConfig g;
  EXPECT_EQ(generate_random(1, g).servers, generate_random(2, g).servers);
  g.per_scenario_servers = true;
  EXPECT_NE(generate_random(1, g).servers, generate_random(2, g).servers);
}

TEST(Generator, PigeonholeWhenDevicesEqualDts) {
  GeneratorConfig g;
  g.num_devices = 4;
  g.num_dts = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s = generate_random(seed, g);
    std::vector<int> count(4, 0);
    for (int m : s.devices.ownership) ++count[m];
    EXPECT_EQ(count, std::vector<int>(4, 1));
  }
}

TEST(Generator, NoEmptyDtsAndCapRespected) {
  GeneratorConfig g;
  g.max_devices_per_dt = 10;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scenario s = generate_random(seed, g);
    std::vector<int> count(g.num_dts, 0);
    for (int m : s.devices.ownership) ++count[m];
    EXPECT_GE(*std::min_element(count.begin(), count.end()), 1);
    EXPECT_LE(*std::max_element(count.begin(), count.end()), 10);
  }
}

TEST(Generator, CapDoesNotDisturbScenariosWithinIt) {
  GeneratorConfig loose;
  loose.max_devices_per_dt = 0;
  GeneratorConfig capped;
  capped.max_devices_per_dt = 16;
  int same = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scenario a = generate_random(seed, loose);
    std::vector<int> count(a.num_dts, 0);
    for (int m : a.devices.ownership) ++count[m];
    if (*std::max_element(count.begin(), count.end()) <= 16) {
      EXPECT_EQ(a, generate_random(seed, capped));
      ++same;
    }
  }
  EXPECT_GT(same, 50);
}

TEST(Generator, DevicesKeepDistanceFromServers) {
  GeneratorConfig g;
  g.min_server_distance = 50.0;
  const Scenario s = generate_random(3, g);
  for (const auto& p : s.devices.locations)
    for (const auto& e : s.servers.edge_locations) EXPECT_GE(distance(p, e), 50.0);
}

TEST(Generator, ClusteredPlacementStaysNearCentre) {
  GeneratorConfig g;
  g.cluster_radius = 20.0;
  const Scenario s = generate_random(5, g);
  EXPECT_TRUE(validate(s).empty());
  // Devices of one DT sit much closer together than uniform placement would give.
  double spread = 0.0;
  int pairs = 0;
  for (int a = 0; a < s.num_devices(); ++a)
    for (int b = a + 1; b < s.num_devices(); ++b)
      if (s.devices.ownership[a] == s.devices.ownership[b]) {
        spread += distance(s.devices.locations[a], s.devices.locations[b]);
        ++pairs;
      }
  EXPECT_LT(spread / pairs, 100.0);
}

TEST(Generator, RejectsFewerDevicesThanDts) {
  GeneratorConfig g;
  g.num_devices = 4;
  g.num_dts = 8;
  EXPECT_THROW(generate_random(1, g), InvalidConfig);
}

TEST(Generator, RejectsBadPhysicalParams) {
  GeneratorConfig g;
  g.params.gamma = 0.0;
  EXPECT_THROW(check_config(g), InvalidConfig);
  g = {};
  g.params.alpha = -0.1;
  EXPECT_THROW(check_config(g), InvalidConfig);
  g = {};
  g.num_devices = 200;
  g.num_dts = 10;
  g.max_devices_per_dt = 16;
  EXPECT_THROW(check_config(g), InvalidConfig);
}

TEST(Validate, WellFormedScenarioHasNoViolations) {
  EXPECT_TRUE(validate(generate_random(11, GeneratorConfig{})).empty());
}

TEST(Validate, ReportsEmptyDt) {
  GeneratorConfig g;
  g.num_devices = 8;
  g.num_dts = 5;
  Scenario s = generate_random(1, g);
  for (auto& m : s.devices.ownership)
    if (m == 3) m = 0;
  EXPECT_EQ(validate(s), std::vector<std::string>{"empty DT 3"});
}

TEST(Validate, ReportsAlphaOutOfRange) {
  Scenario s = generate_random(1, GeneratorConfig{});
  s.params.alpha = 1.5;
  EXPECT_EQ(validate(s), std::vector<std::string>{"alpha out of range"});
}

TEST(Validate, ReportsSeveralViolations) {
  Scenario s = generate_random(1, GeneratorConfig{});
  s.devices.workloads[4] = -1.0;
  s.params.gamma = 2.0;
  s.devices.ownership[0] = 99;
  const auto v = validate(s);
  EXPECT_TRUE(contains(v, "workloads[4] not positive"));
  EXPECT_TRUE(contains(v, "gamma out of range"));
  EXPECT_TRUE(contains(v, "ownership[0] out of range"));
}

TEST(Validate, ReportsLengthMismatch) {
  Scenario s = generate_random(1, GeneratorConfig{});
  s.devices.bandwidths.pop_back();
  EXPECT_TRUE(contains(validate(s), "bandwidths length differs from workloads length"));
}

TEST(Document, RoundTripsExactly) {
  GeneratorConfig g;
  g.cluster_radius = 35.0;
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const Scenario s = generate_random(seed, g);
    EXPECT_EQ(from_document(to_document(s)), s);
  }
}

TEST(Document, EmptyDocumentIsParseError) {
  EXPECT_THROW(from_document(""), ParseError);
  EXPECT_THROW(from_document("{\"servers\": "), ParseError);
}

TEST(Document, MissingFieldNamesPointer) {
  auto j = to_json(generate_random(1, GeneratorConfig{}));
  j["params"].erase("lambda_");
  try {
    from_document(j.dump());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "/params/lambda_");
  }
}

TEST(Document, NegativeWorkloadIsValidationError) {
  auto j = to_json(generate_random(1, GeneratorConfig{}));
  j["devices"]["workloads"][2] = -5.0;
  try {
    from_document(j.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(contains(e.violations(), "workloads[2] not positive"));
  }
}

TEST(Document, WrongTypeIsParseError) {
  auto j = to_json(generate_random(1, GeneratorConfig{}));
  j["num_dts"] = "fifteen";
  EXPECT_THROW(from_document(j.dump()), ParseError);
}

}  // namespace
}  // namespace dtoff
