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
//
// One cell session: the replanner driving the simulator one planner
// second at a time, with an append-only event log that replays to the
// same planner state.

#ifndef KCELL_ENGINE_HPP_
#define KCELL_ENGINE_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kcell/io.hpp"
#include "kcell/replanner.hpp"
#include "kcell/sim.hpp"

namespace kcell {

struct EngineConfig {
  SimConfig sim;
  ReplannerConfig planner;
  std::uint64_t seed = 0;
};

/// Events the planner consumes; everything else in a log is planner output.
inline bool is_planner_input(EventKind k) {
  return k == EventKind::order_placed || k == EventKind::task_completed || k == EventKind::task_failed ||
         k == EventKind::appliance_status;
}

class Engine {
 public:
  Engine(Kitchen kitchen, EngineConfig config)
      : kitchen_(std::move(kitchen)),
        config_(config),
        planner_(config.planner),
        sim_(kitchen_.machines, config.sim, config.seed),
        state_(planner_.initial_state(kitchen_.machines, kitchen_.incompatible_pairs)) {
    if (config.sim.bus_latency_us <= 0 || config.sim.grasp_time_us <= 0)
      throw Error("bus latency and grasp time must be positive");
    sim_.initialize_appliances();
  }

  static Engine from_scenario(const Scenario& s) {
    EngineConfig c;
    c.sim = s.sim;
    c.planner.solver = s.solver;
    c.seed = s.seed;
    Engine e(s.kitchen, c);
    for (const auto& o : s.orders) e.place_order(o.order, o.at_s);
    for (const auto& f : s.faults) e.plan_fault(f);
    for (const auto& u : s.unresponsive) e.sim_.set_unresponsive(u.appliance, u.at_s * kMicrosPerSecond);
    return e;
  }

  const Kitchen& kitchen() const { return kitchen_; }
  const PlannerState& state() const { return state_; }
  const KitchenSim& sim() const { return sim_; }
  const std::vector<KitchenEvent>& log() const { return log_; }
  const Replanner& planner() const { return planner_; }

  /// Next planner second to be processed.
  Seconds clock() const { return next_s_; }

  int next_order_index() const { return next_index_; }

  /// Queues an order for delivery at planner second `at_s` (or the next
  /// processed second if that has passed). The order is renumbered to the
  /// next free index, which is returned.
  int place_order(Order order, std::optional<Seconds> at_s = std::nullopt) {
    int index = next_index_++;
    order = numbered(std::move(order), index);
    Seconds when = std::max(at_s.value_or(next_s_), next_s_);
    inbox_.insert({when, order});
    return index;
  }

  /// Raises `plan.kind` on the listed attempts of a task once they start.
  void plan_fault(FaultPlan plan) {
    if (plan.after_s < 1) throw Error("planned faults need after_s >= 1");
    plans_.push_back(std::move(plan));
  }

  /// Fails whatever runs on `machine` shortly after the current time.
  /// Throws when the machine is idle.
  TaskRef inject_fault(const std::string& machine, FaultKind kind, std::string detail = {}, Seconds after_s = 0) {
    auto task = sim_.running_on(machine);
    if (!task) throw Error("machine " + machine + " is idle");
    sim_.inject_fault({*task, machine, sim_.now() + std::max<Micros>(1, after_s * kMicrosPerSecond), kind,
                       std::move(detail)});
    return *task;
  }

  /// Dry run of an order against the current state; returns the
  /// rejection message, if any.
  std::optional<std::string> check_order(const Order& order) const {
    Order o = numbered(order, next_index_);
    KitchenEvent e{0, state_.clock_s * kMicrosPerSecond, EventKind::order_placed, OrderPlaced{o}};
    PlannerState copy = state_;
    auto r = planner_.step(std::move(copy), {e});
    for (const auto& ev : r.events)
      if (ev.kind == EventKind::operator_alert) return std::get<Alert>(ev.payload).message;
    return std::nullopt;
  }

  /// True when every queued order has arrived and no task is pending or running.
  bool done() const { return inbox_.empty() && state_.idle(); }

  std::function<void(const KitchenEvent&)> on_event;

  /// Processes one planner second.
  void step() {
    const Seconds t = next_s_;
    std::vector<KitchenEvent> inputs;
    for (auto it = inbox_.begin(); it != inbox_.end() && it->first <= t;) {
      inputs.push_back({0, t * kMicrosPerSecond, EventKind::order_placed, OrderPlaced{it->second}});
      it = inbox_.erase(it);
    }
    for (auto& e : sim_.advance_to(t * kMicrosPerSecond)) inputs.push_back(std::move(e));
    for (auto& e : inputs) append(e);
    StepResult r = planner_.tick(std::move(state_), t, inputs);
    state_ = std::move(r.state);
    for (auto& e : r.events) append(e);
    for (const auto& a : r.actions) {
      sim_.start_task(a);
      for (const auto& p : plans_)
        if (p.task == a.spec.ref() && std::find(p.attempts.begin(), p.attempts.end(), a.tries) != p.attempts.end())
          sim_.inject_fault({p.task, a.spec.machine, (t + p.after_s) * kMicrosPerSecond, p.kind, p.detail});
    }
    ++next_s_;
  }

  /// Steps until done or past `until_s`.
  void run(Seconds until_s) {
    while (next_s_ <= until_s && !done()) step();
  }

 private:
  void append(KitchenEvent& e) {
    e.seq = ++seq_;
    log_.push_back(e);
    if (on_event) on_event(e);
  }

  Kitchen kitchen_;
  EngineConfig config_;
  Replanner planner_;
  KitchenSim sim_;
  PlannerState state_;
  std::vector<KitchenEvent> log_;
  std::uint64_t seq_ = 0;
  Seconds next_s_ = 0;
  int next_index_ = 0;
  std::multimap<Seconds, Order> inbox_;
  std::vector<FaultPlan> plans_;
};

struct Replay {
  PlannerState state;
  // Planner output regenerated from the inputs, with log sequence numbers
  // cleared.
  std::vector<KitchenEvent> planner_events;
};

/// Feeds the logged planner inputs back through a fresh replanner, one
/// call per planner second up to `last_s` (default: the last logged second).
inline Replay replay(const Kitchen& kitchen, const ReplannerConfig& config, const std::vector<KitchenEvent>& log,
                     std::optional<Seconds> last_s = std::nullopt) {
  Replanner planner(config);
  Replay out;
  out.state = planner.initial_state(kitchen.machines, kitchen.incompatible_pairs);
  std::map<Seconds, std::vector<KitchenEvent>> by_second;
  Seconds last = 0;
  for (const auto& e : log) {
    last = std::max(last, e.at_s());
    if (is_planner_input(e.kind)) by_second[e.at_s()].push_back(e);
  }
  if (last_s) last = *last_s;
  for (Seconds t = 0; t <= last; ++t) {
    auto r = planner.tick(std::move(out.state), t, by_second[t]);
    out.state = std::move(r.state);
    for (auto& e : r.events) out.planner_events.push_back(std::move(e));
  }
  return out;
}

inline std::vector<KitchenEvent> planner_outputs(const std::vector<KitchenEvent>& log) {
  std::vector<KitchenEvent> out;
  for (auto e : log)
    if (!is_planner_input(e.kind)) {
      e.seq = 0;
      out.push_back(std::move(e));
    }
  return out;
}

}  // namespace kcell

#endif  // KCELL_ENGINE_HPP_
