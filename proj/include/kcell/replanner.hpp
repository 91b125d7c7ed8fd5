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
// Event loop of the cell planner: to-do, running, finished and canceled
// task lists, retry or cancellation on faults, intake of new orders and
// re-solving with running and finished work pinned.

#ifndef KCELL_REPLANNER_HPP_
#define KCELL_REPLANNER_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kcell/domain.hpp"
#include "kcell/jssp.hpp"

namespace kcell {

struct PendingTask {
  TaskSpec spec;
  // Failed attempts so far.
  int tries = 0;
  // Scale applied to impedance gains on the next attempt.
  double impedance_gain_scale = 1.0;

  bool operator==(const PendingTask&) const = default;
};

struct PlannerState {
  std::vector<Machine> machines;
  std::vector<MachinePair> incompatible_pairs;
  std::vector<Order> orders;
  std::vector<PendingTask> todo;
  std::vector<Assignment> running;
  std::vector<Assignment> finished;
  std::vector<Assignment> canceled;
  std::map<std::string, std::vector<TaskRef>> machine_queues;
  Schedule schedule;
  Seconds clock_s = 0;
  std::set<std::string> unavailable;
  int reschedules = 0;

  bool operator==(const PlannerState&) const = default;

  const Order* order(int recipe) const {
    for (const auto& o : orders)
      if (o.recipe == recipe) return &o;
    return nullptr;
  }

  std::size_t task_count() const {
    return todo.size() + running.size() + finished.size() + canceled.size();
  }

  /// True when every accepted order has no pending or running task.
  bool idle() const { return todo.empty() && running.empty(); }
};

/// Command to the cell: start a task now.
struct StartTask {
  TaskSpec spec;
  int tries = 0;
  double impedance_gain_scale = 1.0;
  Seconds at_s = 0;

  bool operator==(const StartTask&) const = default;
};

struct StepResult {
  PlannerState state;
  std::vector<StartTask> actions;
  // Planner-originated events (task_started, task_canceled, reschedule,
  // operator_alert), stamped with the planner clock.
  std::vector<KitchenEvent> events;
};

struct ReplannerConfig {
  SolverConfig solver;
  // Impedance gain scale factor applied per failed grasp.
  double impedance_decay = 0.5;
};

class Replanner {
 public:
  explicit Replanner(ReplannerConfig config = {}) : config_(std::move(config)) {}

  const ReplannerConfig& config() const { return config_; }

  PlannerState initial_state(std::vector<Machine> machines,
                             std::vector<MachinePair> incompatible_pairs) const {
    PlannerState s;
    s.machines = std::move(machines);
    s.incompatible_pairs = std::move(incompatible_pairs);
    for (const auto& m : s.machines) s.machine_queues[m.id];
    return s;
  }

  /// Moves the clock to `now_s` and then runs `step`.
  StepResult tick(PlannerState state, Seconds now_s, const std::vector<KitchenEvent>& events) const {
    if (now_s < state.clock_s) throw Error("clock cannot move backward");
    state.clock_s = now_s;
    return step(std::move(state), events);
  }

  /// Ingests orders, then faults, then completions; re-solves when a new
  /// order arrived or a fault could not be retried; then starts every
  /// task whose predecessors, machines and planned start allow it.
  StepResult step(PlannerState state, const std::vector<KitchenEvent>& events) const {
    StepResult r;
    for (const auto& e : events)
      if (e.at_s() < state.clock_s)
        throw Error("event at " + std::to_string(e.at_s()) + " s precedes planner clock");

    std::vector<int> new_orders;
    bool unretriable = false;
    for (const auto& e : events)
      if (e.kind == EventKind::order_placed)
        if (ingest_order(state, std::get<OrderPlaced>(e.payload).order, r.events))
          new_orders.push_back(std::get<OrderPlaced>(e.payload).order.recipe);
    for (const auto& e : events)
      if (e.kind == EventKind::task_failed) {
        const auto& f = std::get<TaskFailure>(e.payload);
        Fault fault{f.task, f.machine, e.at_us, f.kind, f.detail};
        unretriable |= apply_fault(state, fault, r.events);
      }
    for (const auto& e : events)
      if (e.kind == EventKind::task_completed) complete(state, std::get<TaskPayload>(e.payload).task);

    if (!new_orders.empty() || unretriable) {
      std::string reason = !new_orders.empty() ? "new order" : "unretriable fault";
      std::string diagnosis;
      if (!install_schedule(state, reason, r.events, new_orders.empty(), &diagnosis) && !new_orders.empty()) {
        for (int recipe : new_orders) reject_order(state, recipe, diagnosis, r.events);
        if (unretriable) install_schedule(state, "unretriable fault", r.events, true, nullptr);
      }
    }
    retime(state);
    dispatch(state, r);
    r.state = std::move(state);
    return r;
  }

  /// Retries the faulted running task when its tries allow, otherwise
  /// cancels it and the remaining tasks of every order that still needs
  /// the failed machine.
  PlannerState handle_fault(PlannerState state, const Fault& fault) const {
    std::vector<KitchenEvent> ignored;
    apply_fault(state, fault, ignored);
    retime(state);
    return state;
  }

  /// Solves for the active orders with running and finished tasks pinned
  /// and every other task released at the current clock.
  std::optional<Schedule> reschedule(const PlannerState& state, std::string* diagnosis = nullptr) const {
    std::set<int> active = active_orders(state);
    JsspInstance inst;
    inst.machines = state.machines;
    inst.incompatible_pairs = state.incompatible_pairs;
    inst.release_s = state.clock_s;
    for (const auto& o : state.orders)
      if (active.count(o.recipe)) inst.orders.push_back(o);
    for (const auto* list : {&state.running, &state.finished})
      for (const auto& a : *list)
        if (active.count(a.ref.recipe)) inst.pinned.push_back(a);

    Schedule out;
    if (!inst.orders.empty()) {
      SolveResult res = solve(inst, config_.solver);
      if (!res.schedule) {
        if (diagnosis) *diagnosis = res.diagnosis.empty() ? std::string(to_string(res.status)) : res.diagnosis;
        return std::nullopt;
      }
      for (auto a : res.schedule->assignments) {
        if (const Assignment* p = find_in(state.running, a.ref)) a = *p;
        else if (const Assignment* p = find_in(state.finished, a.ref)) a = *p;
        else if (const PendingTask* t = find_todo(state, a.ref)) a.tries = t->tries;
        out.assignments.push_back(a);
      }
    }
    for (const auto& a : state.schedule.assignments)
      if (!active.count(a.ref.recipe)) out.assignments.push_back(a);
    for (const auto& a : state.canceled)
      if (!out.find(a.ref)) out.assignments.push_back(a);
    out.finalize();
    return out;
  }

 private:
  static const Assignment* find_in(const std::vector<Assignment>& v, TaskRef r) {
    for (const auto& a : v)
      if (a.ref == r) return &a;
    return nullptr;
  }

  static const PendingTask* find_todo(const PlannerState& s, TaskRef r) {
    for (const auto& t : s.todo)
      if (t.spec.ref() == r) return &t;
    return nullptr;
  }

  static Assignment* schedule_entry(PlannerState& s, TaskRef r) {
    for (auto& a : s.schedule.assignments)
      if (a.ref == r) return &a;
    return nullptr;
  }

  static std::set<int> active_orders(const PlannerState& s) {
    std::set<int> out;
    for (const auto& t : s.todo) out.insert(t.spec.recipe);
    for (const auto& a : s.running) out.insert(a.ref.recipe);
    return out;
  }

  static KitchenEvent event(const PlannerState& s, EventKind kind, EventPayload payload) {
    return {0, s.clock_s * kMicrosPerSecond, kind, std::move(payload)};
  }

  static void alert(const PlannerState& s, std::vector<KitchenEvent>& out, std::string message) {
    out.push_back(event(s, EventKind::operator_alert, Alert{std::move(message)}));
  }

  bool ingest_order(PlannerState& s, const Order& order, std::vector<KitchenEvent>& out) const {
    std::string label = "order " + std::to_string(order.recipe);
    if (s.order(order.recipe)) {
      alert(s, out, label + " rejected: duplicate order index");
      return false;
    }
    auto problems = validate_order(order, s.machines);
    if (!problems.empty()) {
      alert(s, out, label + " rejected: " + problems.front());
      return false;
    }
    for (const auto& t : order.tasks)
      for (const auto& m : t.resources())
        if (s.unavailable.count(m)) {
          alert(s, out, label + " rejected: machine " + m + " unavailable");
          return false;
        }
    s.orders.push_back(order);
    for (const auto& t : order.tasks) {
      s.todo.push_back({t, 0, 1.0});
      Assignment a;
      a.ref = t.ref();
      a.machine = t.machine;
      a.tend_machine = t.tend_machine;
      a.start_s = s.clock_s;
      a.end_s = s.clock_s + t.duration_s;
      s.schedule.assignments.push_back(a);
    }
    return true;
  }

  void reject_order(PlannerState& s, int recipe, const std::string& diagnosis,
                    std::vector<KitchenEvent>& out) const {
    alert(s, out, "order " + std::to_string(recipe) + " rejected: infeasible with current work (" + diagnosis + ")");
    auto gone = [&](TaskRef r) { return r.recipe == recipe; };
    std::erase_if(s.orders, [&](const Order& o) { return o.recipe == recipe; });
    std::erase_if(s.todo, [&](const PendingTask& t) { return gone(t.spec.ref()); });
    std::erase_if(s.schedule.assignments, [&](const Assignment& a) { return gone(a.ref); });
    for (auto& [m, q] : s.machine_queues) std::erase_if(q, gone);
  }

  // Returns true when the fault could not be retried.
  bool apply_fault(PlannerState& s, const Fault& f, std::vector<KitchenEvent>& out) const {
    auto it = std::find_if(s.running.begin(), s.running.end(),
                           [&](const Assignment& a) { return a.ref == f.task; });
    if (it == s.running.end()) throw Error("fault references task " + to_string(f.task) + " that is not running");
    Assignment failed = *it;
    s.running.erase(it);
    const TaskSpec& spec = s.order(f.task.recipe)->tasks[static_cast<std::size_t>(f.task.task)];
    const int tries = failed.tries + 1;

    if (tries <= spec.max_retries) {
      double scale = f.kind == FaultKind::grasp_misalignment ? std::pow(config_.impedance_decay, tries) : 1.0;
      s.todo.insert(s.todo.begin(), PendingTask{spec, tries, scale});
      for (const auto& m : spec.resources()) {
        auto& q = s.machine_queues[m];
        q.insert(q.begin(), spec.ref());
      }
      if (Assignment* a = schedule_entry(s, f.task)) {
        a->status = TaskStatus::pending;
        a->tries = tries;
      }
      return false;
    }

    failed.status = TaskStatus::failed;
    failed.tries = tries;
    s.canceled.push_back(failed);
    if (Assignment* a = schedule_entry(s, f.task)) *a = failed;

    std::set<int> doomed{f.task.recipe};
    if (f.kind == FaultKind::machine_failure) {
      std::string machine = f.machine.empty() ? spec.machine : f.machine;
      s.unavailable.insert(machine);
      for (const auto& t : s.todo)
        if (t.spec.uses(machine)) doomed.insert(t.spec.recipe);
    }
    std::vector<PendingTask> keep;
    for (const auto& t : s.todo) {
      if (!doomed.count(t.spec.recipe)) {
        keep.push_back(t);
        continue;
      }
      Assignment c;
      c.ref = t.spec.ref();
      c.machine = t.spec.machine;
      c.tend_machine = t.spec.tend_machine;
      c.start_s = s.clock_s;
      c.end_s = s.clock_s + t.spec.duration_s;
      c.status = TaskStatus::canceled;
      c.tries = t.tries;
      c.rank = -1;
      if (Assignment* a = schedule_entry(s, c.ref)) {
        c.start_s = a->start_s;
        c.end_s = a->end_s;
        *a = c;
      }
      s.canceled.push_back(c);
      out.push_back(event(s, EventKind::task_canceled, TaskPayload{c.ref, c.machine, c.tries, t.impedance_gain_scale}));
    }
    s.todo = std::move(keep);
    for (auto& [m, q] : s.machine_queues)
      std::erase_if(q, [&](TaskRef r) { return doomed.count(r.recipe) > 0 && !find_todo(s, r); });
    s.schedule.finalize();
    return true;
  }

  static void complete(PlannerState& s, TaskRef r) {
    auto it = std::find_if(s.running.begin(), s.running.end(), [&](const Assignment& a) { return a.ref == r; });
    if (it == s.running.end()) throw Error("completion references task " + to_string(r) + " that is not running");
    Assignment a = *it;
    s.running.erase(it);
    a.status = TaskStatus::done;
    s.finished.push_back(a);
    if (Assignment* e = schedule_entry(s, r)) *e = a;
  }

  bool install_schedule(PlannerState& s, const std::string& reason, std::vector<KitchenEvent>& out,
                        bool alert_on_failure, std::string* diagnosis) const {
    std::string why;
    auto sched = reschedule(s, &why);
    if (!sched) {
      if (diagnosis) *diagnosis = why;
      if (alert_on_failure) alert(s, out, "reschedule failed (" + reason + "): " + why);
      return false;
    }
    s.schedule = *sched;
    auto key = [&](const PendingTask& t) {
      const Assignment* a = s.schedule.find(t.spec.ref());
      return std::make_pair(a ? a->start_s : s.clock_s, t.spec.ref());
    };
    std::sort(s.todo.begin(), s.todo.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    for (auto& [m, q] : s.machine_queues) q.clear();
    for (const auto& t : s.todo)
      for (const auto& m : t.spec.resources()) s.machine_queues[m].push_back(t.spec.ref());
    ++s.reschedules;
    out.push_back(event(s, EventKind::reschedule, Rescheduled{s.schedule, reason}));
    return true;
  }

  bool incompatible(const PlannerState& s, const std::vector<std::string>& a,
                    const std::vector<std::string>& b) const {
    std::set<MachinePair> pairs;
    for (const auto& p : s.incompatible_pairs) pairs.insert(normalized(p));
    return detail::incompatible(pairs, a, b);
  }

  // Pushes planned starts of to-do tasks later where running work or
  // earlier to-do work has overrun; never moves a start earlier.
  void retime(PlannerState& s) const {
    struct Slot {
      std::vector<std::string> res;
      Seconds start, end;
    };
    std::vector<Slot> placed;
    std::map<TaskRef, Seconds> end_of;
    for (const auto& a : s.running) {
      Seconds end = std::max(a.end_s, s.clock_s);
      placed.push_back({detail::resources_of(a), a.start_s, end});
      end_of[a.ref] = end;
    }
    for (const auto& a : s.finished) end_of[a.ref] = a.end_s;
    std::vector<std::pair<std::pair<Seconds, TaskRef>, const PendingTask*>> order;
    for (const auto& t : s.todo) {
      const Assignment* a = s.schedule.find(t.spec.ref());
      order.push_back({{a ? a->start_s : s.clock_s, t.spec.ref()}, &t});
    }
    std::sort(order.begin(), order.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [key, t] : order) {
      Seconds start = std::max(key.first, s.clock_s);
      TaskRef r = t->spec.ref();
      if (r.task > 0) {
        auto p = end_of.find({r.recipe, r.task - 1});
        if (p != end_of.end()) start = std::max(start, p->second);
      }
      auto res = t->spec.resources();
      for (bool moved = true; moved;) {
        moved = false;
        for (const auto& slot : placed) {
          bool shares = std::any_of(res.begin(), res.end(), [&](const std::string& m) {
            return std::find(slot.res.begin(), slot.res.end(), m) != slot.res.end();
          });
          if (!shares && !incompatible(s, res, slot.res)) continue;
          if (start < slot.end && slot.start < start + t->spec.duration_s) {
            start = slot.end;
            moved = true;
          }
        }
      }
      placed.push_back({res, start, start + t->spec.duration_s});
      end_of[r] = start + t->spec.duration_s;
      if (Assignment* a = schedule_entry(s, r)) {
        a->start_s = start;
        a->end_s = start + t->spec.duration_s;
      }
    }
    s.schedule.finalize();
  }

  bool eligible(const PlannerState& s, const PendingTask& t) const {
    TaskRef r = t.spec.ref();
    if (r.task > 0 && !find_in(s.finished, {r.recipe, r.task - 1})) return false;
    auto res = t.spec.resources();
    for (const auto& m : res) {
      if (s.unavailable.count(m)) return false;
      auto q = s.machine_queues.find(m);
      if (q == s.machine_queues.end() || q->second.empty() || q->second.front() != r) return false;
    }
    for (const auto& a : s.running) {
      auto busy = detail::resources_of(a);
      for (const auto& m : res)
        if (std::find(busy.begin(), busy.end(), m) != busy.end()) return false;
      if (incompatible(s, res, busy)) return false;
    }
    const Assignment* planned = s.schedule.find(r);
    return !planned || planned->start_s <= s.clock_s;
  }

  void dispatch(PlannerState& s, StepResult& r) const {
    for (bool progress = true; progress;) {
      progress = false;
      for (auto it = s.todo.begin(); it != s.todo.end(); ++it) {
        if (!eligible(s, *it)) continue;
        PendingTask t = *it;
        s.todo.erase(it);
        Assignment a;
        a.ref = t.spec.ref();
        a.machine = t.spec.machine;
        a.tend_machine = t.spec.tend_machine;
        a.start_s = s.clock_s;
        a.end_s = s.clock_s + t.spec.duration_s;
        a.status = TaskStatus::running;
        a.tries = t.tries;
        for (const auto& m : t.spec.resources()) {
          auto& q = s.machine_queues[m];
          q.erase(q.begin());
        }
        if (Assignment* e = schedule_entry(s, a.ref)) {
          a.rank = e->rank;
          *e = a;
        }
        s.running.push_back(a);
        r.actions.push_back({t.spec, t.tries, t.impedance_gain_scale, s.clock_s});
        r.events.push_back(event(s, EventKind::task_started,
                                 TaskPayload{a.ref, a.machine, t.tries, t.impedance_gain_scale}));
        progress = true;
        break;
      }
    }
    s.schedule.finalize();
  }

  ReplannerConfig config_;
};

}  // namespace kcell

#endif  // KCELL_REPLANNER_HPP_
