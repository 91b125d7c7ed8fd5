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

#include "kcell/engine.hpp"

#include <gtest/gtest.h>

#include <set>

namespace kcell {
namespace {

const std::string kData = KCELL_DATA_DIR;

struct Session {
  Scenario scenario;
  Engine engine;
};

Session run(const std::string& name) {
  Scenario s = load_scenario(kData + "/scenarios/" + name + ".json");
  Engine e = Engine::from_scenario(s);
  e.run(s.until_s);
  return {s, std::move(e)};
}

std::vector<KitchenEvent> of_kind(const std::vector<KitchenEvent>& es, EventKind k) {
  std::vector<KitchenEvent> out;
  for (const auto& e : es)
    if (e.kind == k) out.push_back(e);
  return out;
}

TEST(Engine, BaseScenarioCompletesWithoutCancellations) {
  Session r = run("base");
  ASSERT_TRUE(r.engine.done());
  const auto& st = r.engine.state();
  EXPECT_TRUE(st.canceled.empty());
  EXPECT_EQ(st.finished.size(), 15u);
  EXPECT_TRUE(of_kind(r.engine.log(), EventKind::task_canceled).empty());
  EXPECT_TRUE(of_kind(r.engine.log(), EventKind::operator_alert).empty());
}

TEST(Engine, DicingFaultCancelsOnlyFriesRemainder) {
  Session r = run("dicing_fault");
  ASSERT_TRUE(r.engine.done());
  const auto& st = r.engine.state();
  std::set<TaskRef> canceled;
  for (const auto& a : st.canceled) canceled.insert(a.ref);
  std::set<TaskRef> expect;
  for (int j = 1; j < 8; ++j) expect.insert({1, j});
  EXPECT_EQ(canceled, expect);
  for (const auto& a : st.finished) EXPECT_TRUE(a.ref.recipe == 0 || a.ref == (TaskRef{1, 0}));
  EXPECT_EQ(st.finished.size(), 8u);
  EXPECT_TRUE(st.unavailable.count("food_processor"));
  auto failures = of_kind(r.engine.log(), EventKind::task_failed);
  int dicing = 0;
  for (const auto& f : failures) dicing += std::get<TaskFailure>(f.payload).task == TaskRef{1, 1};
  EXPECT_EQ(dicing, 2);
}

TEST(Engine, MidRunOrderReschedulesOnceAndKeepsPins) {
  Session r = run("second_order");
  ASSERT_TRUE(r.engine.done());
  const auto& log = r.engine.log();
  EXPECT_TRUE(r.engine.state().canceled.empty());
  EXPECT_EQ(r.engine.state().finished.size(), 23u);
  auto placed = of_kind(log, EventKind::order_placed);
  ASSERT_EQ(placed.size(), 3u);
  auto reschedules = of_kind(log, EventKind::reschedule);
  std::size_t after = 0;
  for (const auto& e : reschedules) after += e.seq > placed[2].seq;
  EXPECT_EQ(after, 1u);

  // Every task that had started before the new order keeps its start.
  const Rescheduled* mid = nullptr;
  for (const auto& e : reschedules)
    if (e.seq > placed[2].seq) mid = &std::get<Rescheduled>(e.payload);
  ASSERT_NE(mid, nullptr);
  std::map<std::pair<TaskRef, int>, Seconds> started;
  for (const auto& e : log) {
    if (e.seq > placed[2].seq) break;
    if (e.kind == EventKind::task_started) {
      const auto& p = std::get<TaskPayload>(e.payload);
      started[{p.task, p.tries}] = e.at_s();
    }
  }
  ASSERT_FALSE(started.empty());
  for (const auto& [key, at] : started) {
    const Assignment* a = mid->schedule.find(key.first);
    ASSERT_NE(a, nullptr);
    if (a->tries == key.second) EXPECT_EQ(a->start_s, at) << to_string(key.first);
  }
}

TEST(Engine, LogsAreByteIdenticalAcrossRuns) {
  for (const char* name : {"base", "dicing_fault", "second_order"}) {
    EXPECT_EQ(to_ndjson(run(name).engine.log()), to_ndjson(run(name).engine.log())) << name;
  }
}

TEST(Engine, ReplayFromLogRebuildsPlannerState) {
  for (const char* name : {"base", "dicing_fault", "second_order"}) {
    SCOPED_TRACE(name);
    Session r = run(name);
    // Through the serialized form, as a log file would be read back.
    auto parsed = parse_ndjson(to_ndjson(r.engine.log()));
    ASSERT_EQ(parsed, r.engine.log());
    ReplannerConfig config;
    config.solver = r.scenario.solver;
    Replay rep = replay(r.scenario.kitchen, config, parsed, r.engine.clock() - 1);
    EXPECT_EQ(rep.state, r.engine.state());
    EXPECT_EQ(rep.planner_events, planner_outputs(r.engine.log()));
  }
}

TEST(Engine, EventLogIsOrdered) {
  Session r = run("second_order");
  const auto& log = r.engine.log();
  for (std::size_t k = 1; k < log.size(); ++k) {
    EXPECT_EQ(log[k].seq, log[k - 1].seq + 1);
    EXPECT_GE(log[k].at_s(), log[k - 1].at_s());
  }
}

TEST(Engine, DifferentSeedsChangeGraspOutcomes) {
  Scenario s = load_scenario(kData + "/scenarios/base.json");
  std::set<std::string> logs;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    s.seed = seed;
    Engine e = Engine::from_scenario(s);
    e.run(s.until_s);
    EXPECT_TRUE(e.state().canceled.empty());
    logs.insert(to_ndjson(e.log()));
  }
  EXPECT_GT(logs.size(), 1u);
}

TEST(Engine, InjectFaultOnIdleMachineThrows) {
  Scenario s = load_scenario(kData + "/scenarios/base.json");
  Engine e = Engine::from_scenario(s);
  e.step();
  EXPECT_THROW(e.inject_fault("oven", FaultKind::machine_failure), Error);
  TaskRef t = e.inject_fault("right_arm", FaultKind::grasp_misalignment, "bump");
  EXPECT_EQ(t, (TaskRef{1, 0}));
  e.step();
  auto failed = of_kind(e.log(), EventKind::task_failed);
  ASSERT_FALSE(failed.empty());
  EXPECT_EQ(std::get<TaskFailure>(failed.back().payload).detail, "bump");
}

TEST(Engine, UnresponsiveApplianceFailsItsTask) {
  Scenario s = load_scenario(kData + "/scenarios/base.json");
  s.unresponsive.push_back({"oven", 600});
  Engine e = Engine::from_scenario(s);
  e.run(s.until_s);
  EXPECT_TRUE(e.done());
  EXPECT_FALSE(e.state().canceled.empty());
  EXPECT_TRUE(e.state().unavailable.count("oven"));
  EXPECT_EQ(e.sim().image("oven").error_code, kErrorReadTimeout);
}

TEST(Engine, CheckOrderReportsInfeasibility) {
  Scenario s = load_scenario(kData + "/scenarios/base.json");
  Engine e = Engine::from_scenario(s);
  e.run(100);
  Order tight = *s.recipes.find("fries");
  tight.deadline_s = 30;
  auto why = e.check_order(tight);
  ASSERT_TRUE(why.has_value());
  EXPECT_NE(why->find("rejected"), std::string::npos);
  EXPECT_FALSE(e.check_order(*s.recipes.find("fries")).has_value());
}

}  // namespace
}  // namespace kcell
