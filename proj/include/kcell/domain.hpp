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
// Shared vocabulary of the kitchen cell: machines, orders made of task
// chains, schedules and the events exchanged between the planner, the
// simulator and the service layer.

#ifndef KCELL_DOMAIN_HPP_
#define KCELL_DOMAIN_HPP_

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace kcell {

/// Planning time: integer seconds.
using Seconds = std::int64_t;
/// Simulation time: integer microseconds.
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;

/// Smallest planner second at or after a simulation instant.
inline Seconds planner_second(Micros t) {
  return t <= 0 ? 0 : (t + kMicrosPerSecond - 1) / kMicrosPerSecond;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ----- Machines -----

enum class MachineKind {
  oven,
  broiler,
  cooktop,
  pasta_cooker,
  fryer,
  food_processor,
  rotating_mixer,
  spice_dispenser,
  left_arm,
  right_arm,
  storage,
  other,
};

inline constexpr std::pair<MachineKind, std::string_view> kMachineKindNames[] = {
    {MachineKind::oven, "oven"},
    {MachineKind::broiler, "broiler"},
    {MachineKind::cooktop, "cooktop"},
    {MachineKind::pasta_cooker, "pasta_cooker"},
    {MachineKind::fryer, "fryer"},
    {MachineKind::food_processor, "food_processor"},
    {MachineKind::rotating_mixer, "rotating_mixer"},
    {MachineKind::spice_dispenser, "spice_dispenser"},
    {MachineKind::left_arm, "left_arm"},
    {MachineKind::right_arm, "right_arm"},
    {MachineKind::storage, "storage"},
    {MachineKind::other, "other"},
};

inline std::string_view to_string(MachineKind k) {
  for (const auto& [kind, name] : kMachineKindNames)
    if (kind == k) return name;
  return "other";
}

inline std::optional<MachineKind> machine_kind_from(std::string_view s) {
  for (const auto& [kind, name] : kMachineKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

inline bool is_arm(MachineKind k) {
  return k == MachineKind::left_arm || k == MachineKind::right_arm;
}

/// A unit-capacity resource of the cell (appliance or arm).
struct Machine {
  std::string id;
  MachineKind kind = MachineKind::other;
  int capacity = 1;

  bool operator==(const Machine&) const = default;
};

using MachinePair = std::pair<std::string, std::string>;

/// Unordered pair normalized so that first <= second.
inline MachinePair normalized(MachinePair p) {
  if (p.second < p.first) std::swap(p.first, p.second);
  return p;
}

// ----- Tasks and orders -----

enum class GateKind { timed_delay, trajectory_done, busy_clear };

inline std::string_view to_string(GateKind g) {
  switch (g) {
    case GateKind::timed_delay: return "timed_delay";
    case GateKind::trajectory_done: return "trajectory_done";
    case GateKind::busy_clear: return "busy_clear";
  }
  return "timed_delay";
}

inline std::optional<GateKind> gate_kind_from(std::string_view s) {
  if (s == "timed_delay") return GateKind::timed_delay;
  if (s == "trajectory_done") return GateKind::trajectory_done;
  if (s == "busy_clear") return GateKind::busy_clear;
  return std::nullopt;
}

/// Completion condition of a task. A timed delay of 0 means "the task
/// duration".
struct Gate {
  GateKind kind = GateKind::timed_delay;
  Seconds delay_s = 0;

  bool operator==(const Gate&) const = default;
};

struct TaskRef {
  int recipe = 0;
  int task = 0;

  auto operator<=>(const TaskRef&) const = default;
};

inline std::string to_string(TaskRef r) {
  return "(i=" + std::to_string(r.recipe) + ",j=" + std::to_string(r.task) + ")";
}

struct TaskSpec {
  int recipe = 0;
  int index = 0;
  std::string name;
  std::string machine;
  Seconds duration_s = 0;
  Gate gate;
  int max_retries = 0;
  // Second resource held for the whole task (e.g. an arm holding a
  // container under the food processor).
  std::optional<std::string> tend_machine;
  // Task begins with a tool-changer grasp that can misalign.
  bool tool_grasp = false;

  TaskRef ref() const { return {recipe, index}; }

  std::vector<std::string> resources() const {
    std::vector<std::string> r{machine};
    if (tend_machine) r.push_back(*tend_machine);
    return r;
  }

  bool uses(std::string_view m) const {
    return machine == m || (tend_machine && *tend_machine == m);
  }

  bool operator==(const TaskSpec&) const = default;
};

/// A deadline-bearing linear chain of tasks. The deadline bounds the
/// time from the first task's start to the last task's end.
struct Order {
  int recipe = 0;
  std::string name;
  std::vector<TaskSpec> tasks;
  Seconds deadline_s = 0;

  bool operator==(const Order&) const = default;
};

// ----- Schedules -----

enum class TaskStatus { pending, running, done, failed, canceled };

inline std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::running: return "running";
    case TaskStatus::done: return "done";
    case TaskStatus::failed: return "failed";
    case TaskStatus::canceled: return "canceled";
  }
  return "pending";
}

inline std::optional<TaskStatus> task_status_from(std::string_view s) {
  for (auto st : {TaskStatus::pending, TaskStatus::running, TaskStatus::done,
                  TaskStatus::failed, TaskStatus::canceled})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

struct Assignment {
  TaskRef ref;
  std::string machine;
  std::optional<std::string> tend_machine;
  Seconds start_s = 0;
  Seconds end_s = 0;
  TaskStatus status = TaskStatus::pending;
  int tries = 0;
  // Global position of the task from start to finish.
  int rank = 0;

  bool uses(std::string_view m) const {
    return machine == m || (tend_machine && *tend_machine == m);
  }

  bool operator==(const Assignment&) const = default;
};

struct Schedule {
  std::vector<Assignment> assignments;
  Seconds makespan_s = 0;

  const Assignment* find(TaskRef r) const {
    for (const auto& a : assignments)
      if (a.ref == r) return &a;
    return nullptr;
  }

  /// Sorts assignments by (start, ref), recomputes ranks and makespan.
  void finalize() {
    std::sort(assignments.begin(), assignments.end(), [](const auto& a, const auto& b) {
      return std::tie(a.start_s, a.ref) < std::tie(b.start_s, b.ref);
    });
    makespan_s = 0;
    int rank = 0;
    for (auto& a : assignments) {
      if (a.status == TaskStatus::canceled) {
        a.rank = -1;
        continue;
      }
      a.rank = rank++;
      makespan_s = std::max(makespan_s, a.end_s);
    }
  }

  bool operator==(const Schedule&) const = default;
};

// ----- Faults and events -----

enum class FaultKind { grasp_misalignment, machine_failure };

inline std::string_view to_string(FaultKind k) {
  return k == FaultKind::grasp_misalignment ? "grasp_misalignment" : "machine_failure";
}

inline std::optional<FaultKind> fault_kind_from(std::string_view s) {
  if (s == "grasp_misalignment") return FaultKind::grasp_misalignment;
  if (s == "machine_failure") return FaultKind::machine_failure;
  return std::nullopt;
}

/// A failure observed on a running task.
struct Fault {
  TaskRef task;
  std::string machine;
  Micros at_us = 0;
  FaultKind kind = FaultKind::machine_failure;
  std::string detail;

  bool operator==(const Fault&) const = default;
};

enum class EventKind {
  order_placed,
  task_started,
  task_completed,
  task_failed,
  task_canceled,
  reschedule,
  appliance_status,
  operator_alert,
};

inline constexpr std::pair<EventKind, std::string_view> kEventKindNames[] = {
    {EventKind::order_placed, "order_placed"},
    {EventKind::task_started, "task_started"},
    {EventKind::task_completed, "task_completed"},
    {EventKind::task_failed, "task_failed"},
    {EventKind::task_canceled, "task_canceled"},
    {EventKind::reschedule, "reschedule"},
    {EventKind::appliance_status, "appliance_status"},
    {EventKind::operator_alert, "operator_alert"},
};

inline std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : kEventKindNames)
    if (kind == k) return name;
  return "operator_alert";
}

inline std::optional<EventKind> event_kind_from(std::string_view s) {
  for (const auto& [kind, name] : kEventKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

struct OrderPlaced {
  Order order;
  bool operator==(const OrderPlaced&) const = default;
};

struct TaskPayload {
  TaskRef task;
  std::string machine;
  int tries = 0;
  double impedance_gain_scale = 1.0;
  bool operator==(const TaskPayload&) const = default;
};

struct TaskFailure {
  TaskRef task;
  std::string machine;
  FaultKind kind = FaultKind::machine_failure;
  std::string detail;
  bool operator==(const TaskFailure&) const = default;
};

struct Rescheduled {
  Schedule schedule;
  std::string reason;
  bool operator==(const Rescheduled&) const = default;
};

struct ApplianceStatus {
  std::string appliance;
  bool busy = false;
  double temperature_c = 0.0;
  int error_code = 0;
  bool operator==(const ApplianceStatus&) const = default;
};

struct Alert {
  std::string message;
  bool operator==(const Alert&) const = default;
};

using EventPayload = std::variant<std::monostate, OrderPlaced, TaskPayload, TaskFailure,
                                  Rescheduled, ApplianceStatus, Alert>;

struct KitchenEvent {
  std::uint64_t seq = 0;
  Micros at_us = 0;
  EventKind kind = EventKind::operator_alert;
  EventPayload payload;

  Seconds at_s() const { return planner_second(at_us); }

  bool operator==(const KitchenEvent&) const = default;
};

/// Total order on events: timestamp, then sequence number.
inline bool event_before(const KitchenEvent& a, const KitchenEvent& b) {
  return std::tie(a.at_us, a.seq) < std::tie(b.at_us, b.seq);
}

// ----- Validation -----

/// Structural problems of an order against a machine set. An empty
/// result means the order is well formed.
inline std::vector<std::string> validate_order(const Order& order,
                                               const std::vector<Machine>& machines) {
  std::vector<std::string> out;
  auto known = [&](const std::string& id) {
    return std::any_of(machines.begin(), machines.end(),
                       [&](const Machine& m) { return m.id == id; });
  };
  auto add = [&](std::string v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
  };
  if (order.tasks.empty()) add("empty order (i=" + std::to_string(order.recipe) + ")");
  if (order.deadline_s <= 0)
    add("nonpositive deadline (i=" + std::to_string(order.recipe) + ")");
  for (std::size_t j = 0; j < order.tasks.size(); ++j) {
    const TaskSpec& t = order.tasks[j];
    TaskRef r{order.recipe, static_cast<int>(j)};
    if (t.index != static_cast<int>(j) || t.recipe != order.recipe)
      add("noncontiguous task index " + to_string(r));
    if (!known(t.machine)) add("unknown machine " + t.machine);
    if (t.duration_s <= 0) add("nonpositive duration " + to_string(r));
    if (t.max_retries < 0) add("negative max_retries " + to_string(r));
    if (t.tend_machine) {
      if (!known(*t.tend_machine)) add("unknown machine " + *t.tend_machine);
      if (*t.tend_machine == t.machine) add("tend machine equals machine " + to_string(r));
    }
  }
  return out;
}

enum class ViolationKind {
  missing,
  duration,
  precedence,
  overlap,
  concurrence,
  deadline,
  completion_order,
  negative_start,
};

struct Violation {
  ViolationKind kind;
  std::string message;
  std::vector<TaskRef> tasks;
};

namespace detail {

inline bool incompatible(const std::set<MachinePair>& pairs, const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
  for (const auto& m : a)
    for (const auto& n : b)
      if (m != n && pairs.count(normalized({m, n}))) return true;
  return false;
}

inline std::vector<std::string> resources_of(const Assignment& a) {
  std::vector<std::string> r{a.machine};
  if (a.tend_machine) r.push_back(*a.tend_machine);
  return r;
}

}  // namespace detail

/// Reports every violated constraint of `schedule`: precedence, machine
/// overlap, concurrence of incompatible machines, deadlines and ordered
/// order completion. Canceled assignments are ignored, and an order with
/// any canceled task is exempt from its horizon constraints. Throws
/// `Error` when the schedule references a task absent from `orders`.
inline std::vector<Violation> check_schedule(
    const std::vector<Order>& orders, const std::vector<Machine>& machines,
    const std::vector<MachinePair>& incompatible_pairs, const Schedule& schedule) {
  (void)machines;
  std::map<TaskRef, const TaskSpec*> specs;
  for (const auto& o : orders)
    for (const auto& t : o.tasks) specs[{o.recipe, t.index}] = &t;

  std::map<TaskRef, const Assignment*> live;
  std::set<int> canceled_orders;
  for (const auto& a : schedule.assignments) {
    if (!specs.count(a.ref)) throw Error("unknown task reference " + to_string(a.ref));
    if (a.status == TaskStatus::canceled) {
      canceled_orders.insert(a.ref.recipe);
      continue;
    }
    live[a.ref] = &a;
  }

  std::vector<Violation> out;
  for (const auto& o : orders)
    for (const auto& t : o.tasks) {
      TaskRef r{o.recipe, t.index};
      bool canceled = false;
      for (const auto& a : schedule.assignments)
        if (a.ref == r && a.status == TaskStatus::canceled) canceled = true;
      if (!live.count(r) && !canceled)
        out.push_back({ViolationKind::missing, "missing task " + to_string(r), {r}});
    }

  for (const auto& [r, a] : live) {
    const TaskSpec& t = *specs.at(r);
    if (a->start_s < 0)
      out.push_back({ViolationKind::negative_start, "negative start " + to_string(r), {r}});
    if (a->end_s != a->start_s + t.duration_s)
      out.push_back({ViolationKind::duration, "duration mismatch " + to_string(r), {r}});
    if (r.task > 0) {
      auto prev = live.find({r.recipe, r.task - 1});
      if (prev != live.end() && a->start_s < prev->second->end_s)
        out.push_back({ViolationKind::precedence, "precedence violation " + to_string(r),
                       {prev->first, r}});
    }
  }

  std::set<MachinePair> pairs;
  for (const auto& p : incompatible_pairs) pairs.insert(normalized(p));
  std::vector<const Assignment*> all;
  for (const auto& [r, a] : live) all.push_back(a);
  for (std::size_t x = 0; x < all.size(); ++x)
    for (std::size_t y = x + 1; y < all.size(); ++y) {
      const Assignment& a = *all[x];
      const Assignment& b = *all[y];
      bool overlap_in_time = a.start_s < b.end_s && b.start_s < a.end_s;
      if (!overlap_in_time) continue;
      auto ra = detail::resources_of(a);
      auto rb = detail::resources_of(b);
      for (const auto& m : ra)
        if (std::find(rb.begin(), rb.end(), m) != rb.end())
          out.push_back({ViolationKind::overlap, "overlap on machine " + m, {a.ref, b.ref}});
      if (detail::incompatible(pairs, ra, rb))
        out.push_back({ViolationKind::concurrence, "concurrence violation", {a.ref, b.ref}});
    }

  // Horizon: per-order deadline and strictly increasing completion.
  std::vector<std::pair<int, Seconds>> completions;
  for (const auto& o : orders) {
    if (o.tasks.empty() || canceled_orders.count(o.recipe)) continue;
    auto first = live.find({o.recipe, 0});
    auto last = live.find({o.recipe, static_cast<int>(o.tasks.size()) - 1});
    if (first == live.end() || last == live.end()) continue;
    if (last->second->end_s - first->second->start_s > o.deadline_s)
      out.push_back({ViolationKind::deadline,
                     "deadline exceeded (i=" + std::to_string(o.recipe) + ")",
                     {first->first, last->first}});
    completions.emplace_back(o.recipe, last->second->end_s);
  }
  std::sort(completions.begin(), completions.end());
  for (std::size_t k = 1; k < completions.size(); ++k)
    if (!(completions[k - 1].second < completions[k].second))
      out.push_back({ViolationKind::completion_order,
                     "completion order violated (i=" + std::to_string(completions[k - 1].first) +
                         ",i=" + std::to_string(completions[k].first) + ")",
                     {}});
  return out;
}

inline std::vector<std::string> messages(const std::vector<Violation>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.message);
  return out;
}

}  // namespace kcell

#endif  // KCELL_DOMAIN_HPP_
