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

#include "kcell/io.hpp"

#include <gtest/gtest.h>

#include "kcell/engine.hpp"

namespace kcell {
namespace {

const std::string kData = KCELL_DATA_DIR;

// Runs `f` and returns the schema error it raises.
template <typename F>
SchemaError schema_error(F f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e;
  }
  ADD_FAILURE() << "no schema error";
  return SchemaError("", "", 0, "");
}

Kitchen kitchen() { return load_kitchen(kData + "/kitchen.json"); }

RecipeBook recipes_from(const std::string& text, const Kitchen* k) {
  Document d(text, "recipes.json");
  check_schema(d.root());
  return parse_recipes(d.root(), k);
}

TEST(Io, BundledFilesLoad) {
  Kitchen k = kitchen();
  EXPECT_EQ(k.machines.size(), 7u);
  ASSERT_EQ(k.incompatible_pairs.size(), 1u);
  RecipeBook b = load_recipes(kData + "/recipes/steak_frites.json", &k);
  ASSERT_EQ(b.recipes.size(), 2u);
  auto orders = instantiate(b);
  ASSERT_EQ(orders.size(), 2u);
  EXPECT_EQ(orders[1].recipe, 1);
  EXPECT_EQ(orders[1].tasks[1].recipe, 1);
  EXPECT_EQ(orders[1].tasks[1].tend_machine, "right_arm");
  EXPECT_EQ(orders[1].tasks[1].gate.kind, GateKind::busy_clear);
  for (const auto& o : orders) EXPECT_TRUE(validate_order(o, k.machines).empty());
  for (const char* s : {"base", "dicing_fault", "second_order"}) {
    Scenario sc = load_scenario(kData + "/scenarios/" + s + ".json");
    EXPECT_FALSE(sc.orders.empty());
  }
  Scenario b9 = load_scenario(kData + "/scenarios/dicing_fault.json");
  ASSERT_EQ(b9.faults.size(), 1u);
  EXPECT_EQ(b9.faults[0].attempts, (std::vector<int>{0, 1}));
  TrajectoryFile t = load_trajectory(kData + "/trajectory/fryer_basket.json");
  EXPECT_EQ(t.problem.dims, 3);
  EXPECT_EQ(t.problem.vias.size(), 3u);
  LayoutFile l = load_layout(kData + "/layout/toy3.json");
  EXPECT_EQ(l.problem.appliances.size(), 3u);
  EXPECT_TRUE(l.problem.appliances[1].fixed_yaw.has_value());
}

const char* kBadDuration = R"({
  "schema": "kitchen-cell/v1",
  "recipes": [
    {
      "name": "fries",
      "deadline_s": 900,
      "tasks": [
        {"name": "load", "machine": "right_arm", "duration_s": 20},
        {"name": "dice", "machine": "food_processor",
         "duration_s": "sixty"}
      ]
    }
  ]
})";

TEST(Io, WrongTypeNamesPathAndLine) {
  Kitchen k = kitchen();
  SchemaError e = schema_error([&] { recipes_from(kBadDuration, &k); });
  EXPECT_EQ(e.path(), "/recipes/0/tasks/1/duration_s");
  EXPECT_EQ(e.line(), 10);
  EXPECT_NE(std::string(e.what()).find("recipes.json:10"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("expected integer"), std::string::npos);
}

TEST(Io, MissingFieldNamesIt) {
  std::string text = kBadDuration;
  text.replace(text.find(",\n         \"duration_s\": \"sixty\""), std::string(",\n         \"duration_s\": \"sixty\"").size(), "");
  SchemaError e = schema_error([&] { recipes_from(text, nullptr); });
  EXPECT_EQ(e.path(), "/recipes/0/tasks/1/duration_s");
  EXPECT_EQ(e.line(), 9);
  EXPECT_NE(std::string(e.what()).find("missing required field"), std::string::npos);
}

TEST(Io, UnknownMachineAndFieldRejected) {
  Kitchen k = kitchen();
  std::string text = kBadDuration;
  text.replace(text.find("\"sixty\""), 7, "60");
  text.replace(text.find("food_processor"), 14, "blender");
  SchemaError e = schema_error([&] { recipes_from(text, &k); });
  EXPECT_EQ(e.path(), "/recipes/0/tasks/1/machine");
  EXPECT_NE(std::string(e.what()).find("unknown machine blender"), std::string::npos);

  std::string typo = kBadDuration;
  typo.replace(typo.find("\"deadline_s\""), 12, "\"deadline\"");
  SchemaError t = schema_error([&] { recipes_from(typo, &k); });
  EXPECT_EQ(t.path(), "/recipes/0/deadline");
  EXPECT_EQ(t.line(), 6);
}

TEST(Io, NonPositiveDurationRejected) {
  std::string text = kBadDuration;
  text.replace(text.find("\"sixty\""), 7, "0");
  SchemaError e = schema_error([&] { recipes_from(text, nullptr); });
  EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
}

TEST(Io, MalformedJsonReportsLine) {
  std::string text = "{\n  \"schema\": \"kitchen-cell/v1\",\n  \"recipes\": [\n    {,}\n  ]\n}";
  SchemaError e = schema_error([&] { recipes_from(text, nullptr); });
  EXPECT_EQ(e.line(), 4);
  EXPECT_NE(std::string(e.what()).find("malformed JSON"), std::string::npos);
}

TEST(Io, WrongSchemaVersion) {
  SchemaError e = schema_error([] { recipes_from(R"({"schema": "kitchen-cell/v0", "recipes": []})", nullptr); });
  EXPECT_EQ(e.path(), "/schema");
}

TEST(Io, ScenarioChecksReferences) {
  auto scenario = [](const std::string& extra) {
    std::string text = R"({"schema": "kitchen-cell/v1", "kitchen": "kitchen.json",
      "recipes": "recipes/steak_frites.json", "orders": [{"recipe": "fries", "at_s": 0}])" + extra + "}";
    Document d(text, "scenario.json");
    return parse_scenario(d.root(), kData);
  };
  EXPECT_NO_THROW(scenario(""));
  EXPECT_EQ(schema_error([&] { scenario(R"(, "unresponsive": [{"appliance": "toaster", "at_s": 3}])"); }).path(),
            "/unresponsive/0/appliance");
  EXPECT_EQ(schema_error([&] { scenario(R"(, "faults": [{"order": 4, "task": 0, "kind": "machine_failure"}])"); }).path(),
            "/faults/0/order");
  EXPECT_EQ(schema_error([&] { scenario(R"(, "faults": [{"order": 0, "task": 0, "kind": "fire"}])"); }).path(),
            "/faults/0/kind");
}

TEST(Io, EventRoundTripCoversEveryKind) {
  Scenario s = load_scenario(kData + "/scenarios/dicing_fault.json");
  Engine e = Engine::from_scenario(s);
  e.run(s.until_s);
  std::set<EventKind> kinds;
  for (const auto& ev : e.log()) kinds.insert(ev.kind);
  KitchenEvent alert{0, 5, EventKind::operator_alert, Alert{"check \"oven\"\n"}};
  std::vector<KitchenEvent> log = e.log();
  log.push_back(alert);
  kinds.insert(EventKind::operator_alert);
  EXPECT_EQ(kinds.size(), 8u);
  std::string text = to_ndjson(log);
  EXPECT_EQ(parse_ndjson(text), log);
  EXPECT_EQ(to_ndjson(parse_ndjson(text)), text);
}

TEST(Io, BadLogLineNamesLine) {
  std::string text = R"({"seq":1,"at_us":0,"kind":"operator_alert","payload":{"message":"x"}})"
                     "\n"
                     R"({"seq":2,"at_us":0,"kind":"teleport","payload":{}})";
  SchemaError e = schema_error([&] { parse_ndjson(text, "events.ndjson"); });
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.path(), "/kind");
}

TEST(Io, OrderBodyParses) {
  Kitchen k = kitchen();
  Order o = parse_order_text(R"({"name": "toast", "deadline_s": 100,
    "tasks": [{"name": "warm", "machine": "oven", "duration_s": 30}]})", k);
  EXPECT_EQ(o.tasks.size(), 1u);
  EXPECT_THROW(parse_order_text(R"({"name": "toast", "deadline_s": 100, "tasks": []})", k), SchemaError);
}

}  // namespace
}  // namespace kcell
