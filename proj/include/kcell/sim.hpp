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
// Discrete-event model of the cell hardware: appliance memory images
// behind a shared single-message bus, the Update-flag write handshake,
// periodic status polls, arm motions and tool-changer grasps.

#ifndef KCELL_SIM_HPP_
#define KCELL_SIM_HPP_

#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kcell/domain.hpp"
#include "kcell/replanner.hpp"

namespace kcell {

enum class Opcode { none, read, command, initialize };

inline std::string_view to_string(Opcode o) {
  switch (o) {
    case Opcode::none: return "none";
    case Opcode::read: return "read";
    case Opcode::command: return "command";
    case Opcode::initialize: return "initialize";
  }
  return "none";
}

/// Memory image shared between the appliance manager and one appliance
/// microcontroller.
struct ApplianceImage {
  std::string appliance;
  int mcu_id = 0;
  // Command section.
  Opcode opcode = Opcode::none;
  Micros duration_us = 0;
  // Status section.
  bool busy = false;
  double temperature_c = 0.0;
  int error_code = 0;
  // Set by the manager on write, cleared once the command is transmitted.
  int update = 0;
  bool initialized = false;
  bool responsive = true;
};

inline constexpr int kErrorReadTimeout = 1;
inline constexpr int kErrorMachineFailure = 2;

struct SimConfig {
  Micros bus_latency_us = 50'000;
  Micros poll_interval_us = 33'333;
  Micros read_timeout_us = 1'000'000;
  Micros grasp_time_us = 2'000'000;
  double grasp_tolerance_mm = 8.0;
  double grasp_tolerance_deg = 10.0;
  // Offsets are drawn uniformly from [0, max] and scaled on retries.
  double grasp_max_offset_mm = 9.0;
  double grasp_max_offset_deg = 11.0;
  double ambient_c = 20.0;
  bool polling = true;
};

struct GraspAttempt {
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
};

/// A grasp succeeds iff both offsets are within tolerance.
inline bool attempt_grasp(const GraspAttempt& g, const SimConfig& c = {}) {
  return g.translation_mm <= c.grasp_tolerance_mm && g.rotation_deg <= c.grasp_tolerance_deg;
}

inline GraspAttempt draw_grasp(const SimConfig& c, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double t = u(rng) * c.grasp_max_offset_mm * scale;
  double r = u(rng) * c.grasp_max_offset_deg * scale;
  return {t, r};
}

struct BusTransmission {
  std::string appliance;
  Opcode opcode = Opcode::none;
  Micros start_us = 0;
  Micros end_us = 0;
};

struct HandshakeTransition {
  Micros at_us = 0;
  std::string appliance;
  int from = 0;
  int to = 0;
};

/// Raw record of bus and handshake activity for offline checking.
struct SimAudit {
  std::vector<BusTransmission> transmissions;
  std::vector<HandshakeTransition> transitions;
  int rejected_writes = 0;
  int max_in_flight = 0;
};

struct MachineView {
  std::string id;
  MachineKind kind = MachineKind::other;
  std::optional<TaskRef> task;
  std::optional<ApplianceImage> image;
};

class KitchenSim {
 public:
  KitchenSim(std::vector<Machine> machines, SimConfig config = {}, std::uint64_t seed = 0)
      : machines_(std::move(machines)), config_(config), rng_(seed) {
    int mcu = 1;
    for (const auto& m : machines_) {
      if (is_arm(m.kind)) continue;
      ApplianceImage img;
      img.appliance = m.id;
      img.mcu_id = mcu++;
      img.temperature_c = config_.ambient_c;
      images_[m.id] = img;
      poll_order_.push_back(m.id);
    }
    if (config_.polling && !poll_order_.empty()) at(0, {TimerKind::poll});
  }

  Micros now() const { return now_us_; }
  const SimConfig& config() const { return config_; }
  const SimAudit& audit() const { return audit_; }
  const std::vector<Machine>& machines() const { return machines_; }

  const ApplianceImage& image(const std::string& appliance) const {
    auto it = images_.find(appliance);
    if (it == images_.end()) throw Error("unknown appliance " + appliance);
    return it->second;
  }

  /// Task currently holding `machine`, if any.
  std::optional<TaskRef> running_on(const std::string& machine) const {
    auto it = owner_.find(machine);
    if (it == owner_.end()) return std::nullopt;
    return it->second;
  }

  bool running(TaskRef r) const { return tasks_.count(r) > 0; }

  std::vector<MachineView> view() const {
    std::vector<MachineView> out;
    for (const auto& m : machines_) {
      MachineView v{m.id, m.kind, running_on(m.id), std::nullopt};
      if (auto it = images_.find(m.id); it != images_.end()) v.image = it->second;
      out.push_back(v);
    }
    return out;
  }

  /// Queues an Initialize for every appliance.
  void initialize_appliances() {
    for (const auto& id : poll_order_) write(id, Opcode::initialize, 0);
  }

  /// Manager-side write of a command section. Rejected while the
  /// previous write is still untransmitted (Update = 1).
  bool write_command(const std::string& appliance, Opcode opcode, Micros duration_us) {
    if (opcode == Opcode::read || opcode == Opcode::none) throw Error("write_command takes command or initialize");
    image(appliance);
    auto& img = images_[appliance];
    if (img.update == 1) {
      ++audit_.rejected_writes;
      return false;
    }
    img.opcode = opcode;
    img.duration_us = duration_us;
    set_update(img, 1);
    commands_.push_back(appliance);
    pump();
    return true;
  }

  /// Makes an appliance stop answering reads from `at_us` on.
  void set_unresponsive(const std::string& appliance, Micros at_us) {
    image(appliance);
    if (at_us < now_us_) throw Error("unresponsive time precedes sim clock");
    at(at_us, {TimerKind::unresponsive, appliance});
  }

  /// Starts a dispatched task at the current time.
  void start_task(const StartTask& action) {
    const TaskSpec& spec = action.spec;
    for (const auto& m : spec.resources()) {
      if (!kind_of(m)) throw Error("unknown machine " + m);
      if (owner_.count(m)) throw Error("machine " + m + " already busy");
    }
    Running run{spec, ++attempts_};
    for (const auto& m : spec.resources()) owner_[m] = spec.ref();
    tasks_[spec.ref()] = run;
    if (spec.tool_grasp) {
      GraspAttempt g = draw_grasp(config_, action.impedance_gain_scale, rng_);
      grasps_.push_back(g);
      if (!attempt_grasp(g, config_)) {
        at(now_us_ + config_.grasp_time_us, {TimerKind::fault, spec.machine, spec.ref(), run.attempt, 0,
                                             FaultKind::grasp_misalignment, "grasp offset " + describe(g)});
        return;
      }
    }
    Micros d = spec.duration_s * kMicrosPerSecond;
    bool appliance = images_.count(spec.machine) > 0;
    if (appliance) write(spec.machine, Opcode::command, d);
    if (!appliance || spec.gate.kind != GateKind::busy_clear) {
      Seconds delay = spec.gate.kind == GateKind::timed_delay && spec.gate.delay_s > 0 ? spec.gate.delay_s : spec.duration_s;
      at(now_us_ + delay * kMicrosPerSecond, {TimerKind::task_done, spec.machine, spec.ref(), run.attempt});
    }
  }

  /// Schedules a failure of a running task. Throws when the task is not
  /// running, names a machine the task does not hold, or lies in the past.
  void inject_fault(const Fault& fault) {
    if (fault.at_us < now_us_) throw Error("fault time precedes sim clock");
    auto it = tasks_.find(fault.task);
    if (it == tasks_.end()) throw Error("task " + to_string(fault.task) + " is not running");
    if (!fault.machine.empty() && !it->second.spec.uses(fault.machine))
      throw Error("machine " + fault.machine + " is idle");
    at(fault.at_us, {TimerKind::fault, fault.machine.empty() ? it->second.spec.machine : fault.machine,
                     fault.task, it->second.attempt, 0, fault.kind, fault.detail});
  }

  /// Processes everything up to and including `t_us`.
  std::vector<KitchenEvent> advance_to(Micros t_us) {
    if (t_us < now_us_) throw Error("sim clock cannot move backward");
    std::vector<KitchenEvent> out = std::move(backlog_);
    backlog_.clear();
    out_ = &out;
    while (!timers_.empty() && timers_.begin()->first.first <= t_us) {
      auto node = timers_.extract(timers_.begin());
      now_us_ = node.key().first;
      fire(node.mapped());
    }
    now_us_ = t_us;
    out_ = nullptr;
    return out;
  }

  const std::vector<GraspAttempt>& grasps() const { return grasps_; }

 private:
  enum class TimerKind { bus_done, busy_clear, task_done, fault, poll, unresponsive };

  struct Timer {
    TimerKind kind;
    std::string machine;
    TaskRef task;
    std::uint64_t attempt = 0;
    // Busy period a busy_clear belongs to.
    std::uint64_t token = 0;
    FaultKind fault = FaultKind::machine_failure;
    std::string detail;
  };

  struct Running {
    TaskSpec spec;
    std::uint64_t attempt = 0;
  };

  struct InFlight {
    std::string appliance;
    Opcode opcode;
    bool answered = true;
  };

  static std::string describe(const GraspAttempt& g) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f mm %.2f deg", g.translation_mm, g.rotation_deg);
    return buf;
  }

  std::optional<MachineKind> kind_of(const std::string& id) const {
    for (const auto& m : machines_)
      if (m.id == id) return m.kind;
    return std::nullopt;
  }

  void at(Micros t, Timer timer) { timers_.emplace(std::make_pair(t, timer_seq_++), std::move(timer)); }

  void emit(EventKind kind, EventPayload payload) {
    if (out_) out_->push_back({0, now_us_, kind, std::move(payload)});
    else backlog_.push_back({0, now_us_, kind, std::move(payload)});
  }

  void status(const ApplianceImage& img) {
    emit(EventKind::appliance_status, ApplianceStatus{img.appliance, img.busy, img.temperature_c, img.error_code});
  }

  void set_update(ApplianceImage& img, int to) {
    audit_.transitions.push_back({now_us_, img.appliance, img.update, to});
    img.update = to;
  }

  // Writes now or as soon as the handshake allows.
  void write(const std::string& appliance, Opcode opcode, Micros duration_us) {
    if (images_[appliance].update == 1 || !deferred_[appliance].empty()) {
      deferred_[appliance].push_back({opcode, duration_us});
      return;
    }
    write_command(appliance, opcode, duration_us);
  }

  void pump() {
    if (in_flight_) return;
    std::string target;
    Opcode op;
    if (!commands_.empty()) {
      target = commands_.front();
      commands_.pop_front();
      op = images_[target].opcode;
    } else if (poll_pending_) {
      target = *poll_pending_;
      poll_pending_.reset();
      op = Opcode::read;
    } else {
      return;
    }
    const auto& img = images_[target];
    bool answered = op != Opcode::read || img.responsive;
    Micros end = now_us_ + (answered ? config_.bus_latency_us : config_.read_timeout_us);
    in_flight_ = InFlight{target, op, answered};
    audit_.max_in_flight = std::max(audit_.max_in_flight, 1);
    audit_.transmissions.push_back({target, op, now_us_, end});
    at(end, {TimerKind::bus_done, target});
  }

  void release(TaskRef r) {
    auto it = tasks_.find(r);
    if (it == tasks_.end()) return;
    for (const auto& m : it->second.spec.resources()) owner_.erase(m);
    tasks_.erase(it);
  }

  bool current(TaskRef r, std::uint64_t attempt) const {
    auto it = tasks_.find(r);
    return it != tasks_.end() && it->second.attempt == attempt;
  }

  void fail(TaskRef r, const std::string& machine, FaultKind kind, const std::string& detail) {
    emit(EventKind::task_failed, TaskFailure{r, machine, kind, detail});
    release(r);
  }

  void fire(const Timer& t) {
    switch (t.kind) {
      case TimerKind::poll: {
        if (!in_flight_ && commands_.empty() && !poll_pending_) {
          for (std::size_t k = 0; k < poll_order_.size(); ++k) {
            const std::string& id = poll_order_[(next_poll_ + k) % poll_order_.size()];
            if (images_[id].error_code == kErrorReadTimeout) continue;
            poll_pending_ = id;
            next_poll_ = (next_poll_ + k + 1) % poll_order_.size();
            break;
          }
          pump();
        }
        at(now_us_ + config_.poll_interval_us, {TimerKind::poll});
        break;
      }
      case TimerKind::bus_done: {
        InFlight msg = *in_flight_;
        in_flight_.reset();
        deliver(msg);
        pump();
        break;
      }
      case TimerKind::busy_clear: {
        auto& img = images_[t.machine];
        if (img.busy && busy_token_[t.machine] == t.token) {
          img.busy = false;
          img.temperature_c = config_.ambient_c;
          status(img);
          if (current(t.task, t.attempt) && tasks_[t.task].spec.gate.kind == GateKind::busy_clear) {
            emit(EventKind::task_completed, TaskPayload{t.task, t.machine, 0, 1.0});
            release(t.task);
          }
        }
        break;
      }
      case TimerKind::task_done:
        if (current(t.task, t.attempt)) {
          emit(EventKind::task_completed, TaskPayload{t.task, t.machine, 0, 1.0});
          release(t.task);
        }
        break;
      case TimerKind::fault:
        if (current(t.task, t.attempt)) {
          if (auto it = images_.find(t.machine); it != images_.end() && t.fault == FaultKind::machine_failure) {
            it->second.busy = false;
            it->second.error_code = kErrorMachineFailure;
            status(it->second);
            ++busy_token_[t.machine];
          }
          fail(t.task, t.machine, t.fault, t.detail);
        }
        break;
      case TimerKind::unresponsive:
        images_[t.machine].responsive = false;
        break;
    }
  }

  static constexpr double setpoint(MachineKind k) {
    switch (k) {
      case MachineKind::oven: return 200.0;
      case MachineKind::broiler: return 260.0;
      case MachineKind::cooktop: return 230.0;
      case MachineKind::pasta_cooker: return 100.0;
      case MachineKind::fryer: return 180.0;
      default: return 20.0;
    }
  }

  void deliver(const InFlight& msg) {
    auto& img = images_[msg.appliance];
    if (msg.opcode == Opcode::read) {
      if (!msg.answered) {
        img.error_code = kErrorReadTimeout;
        status(img);
        if (auto r = running_on(msg.appliance))
          fail(*r, msg.appliance, FaultKind::machine_failure, "status read timed out");
      }
      return;
    }
    if (msg.opcode == Opcode::initialize) {
      img.initialized = true;
      img.error_code = 0;
      img.temperature_c = config_.ambient_c;
    } else if (msg.opcode == Opcode::command) {
      img.busy = true;
      img.error_code = 0;
      img.temperature_c = setpoint(*kind_of(msg.appliance));
      std::uint64_t token = ++busy_token_[msg.appliance];
      auto owner = running_on(msg.appliance);
      TaskRef task = owner ? *owner : TaskRef{-1, -1};
      std::uint64_t attempt = owner ? tasks_[*owner].attempt : 0;
      at(now_us_ + img.duration_us, {TimerKind::busy_clear, msg.appliance, task, attempt, token});
      status(img);
    }
    set_update(img, 0);
    auto& q = deferred_[msg.appliance];
    if (!q.empty()) {
      auto [op, d] = q.front();
      q.pop_front();
      write_command(msg.appliance, op, d);
    }
  }

  std::vector<Machine> machines_;
  SimConfig config_;
  std::mt19937_64 rng_;
  Micros now_us_ = 0;
  std::map<std::pair<Micros, std::uint64_t>, Timer> timers_;
  std::uint64_t timer_seq_ = 0;
  std::map<std::string, ApplianceImage> images_;
  std::vector<std::string> poll_order_;
  std::size_t next_poll_ = 0;
  std::deque<std::string> commands_;
  std::optional<std::string> poll_pending_;
  std::optional<InFlight> in_flight_;
  std::map<std::string, std::deque<std::pair<Opcode, Micros>>> deferred_;
  std::map<std::string, std::uint64_t> busy_token_;
  std::map<TaskRef, Running> tasks_;
  std::map<std::string, TaskRef> owner_;
  std::uint64_t attempts_ = 0;
  std::vector<GraspAttempt> grasps_;
  SimAudit audit_;
  std::vector<KitchenEvent>* out_ = nullptr;
  std::vector<KitchenEvent> backlog_;
};

}  // namespace kcell

#endif  // KCELL_SIM_HPP_
