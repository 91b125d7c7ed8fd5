// Copyright 2026 The kcell Authors
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
//

// Runs the kcell binary and checks exit codes and outputs.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcell/io.hpp"

namespace kcell {
namespace {

const std::string kData = KCELL_DATA_DIR;
const std::string kCli = KCELL_CLI;

struct Output {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Output run(const std::string& args) {
  Output o;
  std::string cmd = "'" + kCli + "' " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return o;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) o.out.append(buf, n);
  int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string temp(const std::string& name) { return testing::TempDir() + "kcell_cli_" + name; }

std::string write(const std::string& name, const std::string& text) {
  std::string path = temp(name);
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, ScheduleBundledRecipes) {
  std::string out = temp("sched.json");
  Output o = run("schedule " + kData + "/recipes/steak_frites.json " + kData + "/kitchen.json -o " + out);
  EXPECT_EQ(o.code, 0) << o.out;
  Json j = Json::parse(slurp(out));
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_EQ(j["schedule"]["assignments"].size(), 15u);
  EXPECT_EQ(j["schedule"]["makespan_s"], 821);

  Output svg = run("schedule " + kData + "/recipes/steak_frites.json " + kData + "/kitchen.json --format svg");
  EXPECT_EQ(svg.code, 0);
  EXPECT_NE(svg.out.find("<svg"), std::string::npos);
  Output text = run("schedule " + kData + "/recipes/steak_frites.json " + kData + "/kitchen.json --format gantt-text");
  EXPECT_NE(text.out.find("food_processor"), std::string::npos);
}

TEST(Cli, ImpossibleDeadlineExitsTwo) {
  std::string recipes = write("tight.json", R"({"schema": "kitchen-cell/v1",
 "recipes": [{"name": "rush", "deadline_s": 1,
   "tasks": [{"name": "bake", "machine": "oven", "duration_s": 300}]}]})");
  Output o = run("schedule " + recipes + " " + kData + "/kitchen.json");
  EXPECT_EQ(o.code, 2) << o.out;
  EXPECT_NE(o.out.find("infeasible"), std::string::npos);
}

TEST(Cli, MalformedFileNamesTheField) {
  std::string recipes = write("typo.json", R"({"schema": "kitchen-cell/v1",
 "recipes": [{"name": "rush", "deadline_s": 100,
   "tasks": [{"name": "bake", "machine": "oven", "duraton_s": 300}]}]})");
  Output o = run("schedule " + recipes + " " + kData + "/kitchen.json");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.out.find("/recipes/0/tasks/0/duraton_s"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find(":3:"), std::string::npos) << o.out;

  Output missing = run("schedule /no/such/file.json " + kData + "/kitchen.json");
  EXPECT_EQ(missing.code, 1);
}

TEST(Cli, SimulateIsReplayDeterministic) {
  for (const char* name : {"base", "dicing_fault", "second_order"}) {
    std::string scenario = kData + "/scenarios/" + name + ".json";
    Output a = run("simulate " + scenario + " --events-out " + temp("a.ndjson"));
    Output b = run("simulate " + scenario + " --seed 7 --events-out " + temp("b.ndjson"));
    ASSERT_EQ(a.code, 0) << a.out;
    ASSERT_EQ(b.code, 0) << b.out;
    std::string log = slurp(temp("a.ndjson"));
    EXPECT_FALSE(log.empty());
    EXPECT_EQ(log, slurp(temp("b.ndjson"))) << name;
  }
  Output early = run("simulate " + kData + "/scenarios/base.json --until-s 100");
  EXPECT_EQ(early.code, 3);
  EXPECT_NE(early.out.find("horizon reached"), std::string::npos);
}

TEST(Cli, SimulateRejectsUnknownAppliance) {
  std::string scenario = write("bad_scenario.json", R"({"schema": "kitchen-cell/v1",
  "kitchen": ")" + kData + R"(/kitchen.json",
  "recipes": ")" + kData + R"(/recipes/steak_frites.json",
  "orders": [{"recipe": "fries", "at_s": 0}],
  "unresponsive": [{"appliance": "toaster", "at_s": 5}]})");
  Output o = run("simulate " + scenario);
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.out.find("/unresponsive/0/appliance"), std::string::npos) << o.out;
}

TEST(Cli, TrajectoryCsv) {
  Output o = run("trajectory " + kData + "/trajectory/fryer_basket.json");
  ASSERT_EQ(o.code, 0);
  std::istringstream lines(o.out);
  std::string header;
  std::getline(lines, header);
  // stderr summary may come first.
  while (header.rfind("t,", 0) != 0 && std::getline(lines, header)) {
  }
  EXPECT_EQ(header, "t,x0,xd0,xdd0,xddd0,x1,xd1,xdd1,xddd1,x2,xd2,xdd2,xddd2");
  int rows = 0;
  for (std::string line; std::getline(lines, line);)
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++rows;
  EXPECT_EQ(rows, 64);
}

TEST(Cli, LayoutAndArm) {
  std::string out = temp("layout.json");
  Output o = run("layout " + kData + "/layout/toy3.json -o " + out);
  ASSERT_EQ(o.code, 0) << o.out;
  Json j = Json::parse(slurp(out));
  EXPECT_TRUE(j["feasible"].get<bool>());
  EXPECT_EQ(j["placements"].size(), 3u);

  EXPECT_EQ(run("arm --payload-kg 5 --factor 1").code, 0);
  Output heavy = run("arm --payload-kg 5 --factor 1.5");
  EXPECT_EQ(heavy.code, 2);
  EXPECT_NE(heavy.out.find("shoulder_pitch"), std::string::npos);
}

}  // namespace
}  // namespace kcell
