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
// Cooking job-shop scheduler.
//
// Every task gets an integer start-time domain [lb, ub]. Precedence,
// deadlines and ordered order completion are difference constraints
// x_to >= x_from + w and are propagated as bounds to a fixpoint. Each
// pair of tasks that may not run together (shared machine or an
// incompatible machine pair) gets a boolean ordering literal; search
// decides these literals depth first. When a domain empties, the
// literals on the reason chains of the failing bounds form the
// explanation, and search backjumps to the deepest literal in it. Each
// leaf is the earliest-start schedule of its orientation, and every
// solution tightens a makespan bound (branch and bound).
//
// brute_force() is an independent oracle for small instances: it
// enumerates every interleaving of the order chains and computes the
// earliest-start schedule of the resulting orientation by longest paths.

#ifndef KCELL_JSSP_HPP_
#define KCELL_JSSP_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kcell/domain.hpp"

namespace kcell {

struct JsspInstance {
  std::vector<Order> orders;
  std::vector<Machine> machines;
  std::vector<MachinePair> incompatible_pairs;
  // Running or finished tasks whose start times must not move.
  std::vector<Assignment> pinned;
  // Earliest start of every task that is not pinned.
  Seconds release_s = 0;
};

enum class Branching { smallest_domain_first, earliest_deadline_first };

struct SolverConfig {
  std::int64_t time_budget_ms = 10'000;
  std::int64_t node_budget = 20'000'000;
  std::uint64_t random_seed = 0;
  Branching branching = Branching::smallest_domain_first;
};

struct SolverStats {
  std::int64_t nodes = 0;
  std::int64_t conflicts = 0;
  std::int64_t backjumps = 0;
  std::int64_t solutions = 0;
};

enum class SolveStatus { optimal, infeasible, timed_out };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::timed_out: return "timed_out";
  }
  return "infeasible";
}

struct SolveResult {
  SolveStatus status = SolveStatus::infeasible;
  // Optimal schedule, or the best incumbent on timeout (may be empty).
  std::optional<Schedule> schedule;
  SolverStats stats;
  std::string diagnosis;
};

/// Search state over a JsspModel. Literal values: 0 undecided, +1 first
/// task of the pair before the second, -1 the reverse.
struct SearchState {
  std::vector<Seconds> lb;
  std::vector<Seconds> ub;
  std::vector<std::int8_t> literal;
  std::vector<int> trail;
  Seconds makespan_bound = std::numeric_limits<Seconds>::max();
  std::optional<Schedule> incumbent;
  SolverStats stats;

  void decide(int pair, bool first_before_second) {
    literal[static_cast<std::size_t>(pair)] = first_before_second ? 1 : -1;
    trail.push_back(pair);
  }

  void undo() {
    literal[static_cast<std::size_t>(trail.back())] = 0;
    trail.pop_back();
  }
};

struct PropagationResult {
  bool ok = true;
  // Decided pair literals implying the conflict.
  std::vector<int> explanation;
  int conflict_task = -1;
};

class JsspModel {
 public:
  struct Task {
    TaskRef ref;
    std::string machine;
    std::optional<std::string> tend_machine;
    Seconds duration = 0;
    std::vector<int> resources;
    std::optional<Assignment> pinned;
  };

  // x[to] >= x[from] + weight; literal is the deciding pair or -1.
  struct Arc {
    int from = 0;
    int to = 0;
    Seconds weight = 0;
    int literal = -1;
  };

  struct Pair {
    int first = 0;
    int second = 0;
  };

  explicit JsspModel(const JsspInstance& inst) : instance_(inst) {
    std::map<std::string, int> machine_index;
    for (std::size_t m = 0; m < inst.machines.size(); ++m)
      machine_index[inst.machines[m].id] = static_cast<int>(m);
    auto resource = [&](const std::string& id) {
      auto it = machine_index.find(id);
      if (it == machine_index.end()) throw Error("unknown machine " + id);
      return it->second;
    };

    std::map<TaskRef, const Assignment*> pins;
    for (const auto& p : inst.pinned) pins[p.ref] = &p;

    Seconds max_root = std::max<Seconds>(inst.release_s, 0);
    Seconds total = 0;
    std::vector<const Order*> sorted;
    for (const auto& o : inst.orders) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(),
              [](const Order* a, const Order* b) { return a->recipe < b->recipe; });

    for (const Order* o : sorted) {
      first_of_order_.push_back(static_cast<int>(tasks_.size()));
      for (const auto& t : o->tasks) {
        Task task;
        task.ref = {o->recipe, t.index};
        task.machine = t.machine;
        task.tend_machine = t.tend_machine;
        task.duration = t.duration_s;
        for (const auto& r : t.resources()) task.resources.push_back(resource(r));
        if (auto it = pins.find(task.ref); it != pins.end()) {
          task.pinned = *it->second;
          max_root = std::max(max_root, it->second->start_s);
        }
        total += t.duration_s;
        index_[task.ref] = static_cast<int>(tasks_.size());
        tasks_.push_back(std::move(task));
      }
      last_of_order_.push_back(static_cast<int>(tasks_.size()) - 1);
    }
    for (const auto& [ref, a] : pins)
      if (!index_.count(ref)) throw Error("pinned task not in instance " + to_string(ref));

    horizon_ = max_root + total + static_cast<Seconds>(sorted.size()) + 1;

    auto both_pinned = [&](int a, int b) {
      return tasks_[static_cast<std::size_t>(a)].pinned && tasks_[static_cast<std::size_t>(b)].pinned;
    };
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const Order& o = *sorted[k];
      if (o.tasks.empty()) continue;
      int first = first_of_order_[k];
      int last = last_of_order_[k];
      for (int v = first + 1; v <= last; ++v)
        arcs_.push_back({v - 1, v, tasks_[static_cast<std::size_t>(v - 1)].duration, -1});
      if (!both_pinned(first, last))
        arcs_.push_back({last, first, tasks_[static_cast<std::size_t>(last)].duration - o.deadline_s, -1});
      if (k > 0 && !sorted[k - 1]->tasks.empty()) {
        int prev_last = last_of_order_[k - 1];
        if (!both_pinned(prev_last, last))
          arcs_.push_back({prev_last, last,
                           tasks_[static_cast<std::size_t>(prev_last)].duration + 1 -
                               tasks_[static_cast<std::size_t>(last)].duration,
                           -1});
      }
    }

    std::set<std::pair<int, int>> incompatible;
    for (const auto& [m, n] : inst.incompatible_pairs) {
      int a = resource(m), b = resource(n);
      incompatible.insert({std::min(a, b), std::max(a, b)});
    }
    auto conflicting = [&](const Task& a, const Task& b) {
      for (int m : a.resources)
        for (int n : b.resources)
          if (m == n || incompatible.count({std::min(m, n), std::max(m, n)})) return true;
      return false;
    };
    for (std::size_t a = 0; a < tasks_.size(); ++a)
      for (std::size_t b = a + 1; b < tasks_.size(); ++b) {
        if (tasks_[a].ref.recipe == tasks_[b].ref.recipe) continue;
        if (tasks_[a].pinned && tasks_[b].pinned) continue;
        if (!conflicting(tasks_[a], tasks_[b])) continue;
        pair_index_[{static_cast<int>(a), static_cast<int>(b)}] = static_cast<int>(pairs_.size());
        pairs_.push_back({static_cast<int>(a), static_cast<int>(b)});
      }

    for (std::size_t m = 0; m < inst.machines.size(); ++m) {
      std::vector<int> users;
      for (std::size_t v = 0; v < tasks_.size(); ++v)
        if (std::count(tasks_[v].resources.begin(), tasks_[v].resources.end(), static_cast<int>(m)))
          users.push_back(static_cast<int>(v));
      if (users.size() > 1) machine_users_.push_back(std::move(users));
    }
  }

  const JsspInstance& instance() const { return instance_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<Pair>& pairs() const { return pairs_; }
  const std::vector<Arc>& static_arcs() const { return arcs_; }
  /// Upper bound on the end time of any task in an optimal schedule.
  Seconds horizon() const { return horizon_; }

  std::optional<int> task_index(TaskRef r) const {
    auto it = index_.find(r);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<int> pair_index(TaskRef a, TaskRef b) const {
    auto ia = task_index(a), ib = task_index(b);
    if (!ia || !ib) return std::nullopt;
    auto it = pair_index_.find({std::min(*ia, *ib), std::max(*ia, *ib)});
    if (it == pair_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Orients pair `pair` so that task `before` precedes the other one.
  void decide(SearchState& s, int pair, TaskRef before) const {
    const Pair& p = pairs_[static_cast<std::size_t>(pair)];
    s.decide(pair, tasks_[static_cast<std::size_t>(p.first)].ref == before);
  }

  SearchState initial_state() const {
    SearchState s;
    s.literal.assign(pairs_.size(), 0);
    s.lb.assign(tasks_.size(), 0);
    s.ub.assign(tasks_.size(), 0);
    return s;
  }

  /// Tightens s.lb / s.ub to the bounds fixpoint implied by the static
  /// constraints, the decided literals and the makespan bound. On
  /// conflict the explanation lists the decided literals on the reason
  /// chains of the emptied domain.
  PropagationResult propagate(SearchState& s) const {
    const std::size_t n = tasks_.size();
    std::vector<Arc> arcs = arcs_;
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      if (s.literal[p] == 0) continue;
      int a = pairs_[p].first, b = pairs_[p].second;
      if (s.literal[p] < 0) std::swap(a, b);
      arcs.push_back({a, b, tasks_[static_cast<std::size_t>(a)].duration, static_cast<int>(p)});
    }
    std::vector<std::vector<int>> out(n), in(n);
    for (std::size_t k = 0; k < arcs.size(); ++k) {
      out[static_cast<std::size_t>(arcs[k].from)].push_back(static_cast<int>(k));
      in[static_cast<std::size_t>(arcs[k].to)].push_back(static_cast<int>(k));
    }

    std::vector<Seconds>& lb = s.lb;
    std::vector<Seconds>& ub = s.ub;
    std::vector<int> lb_reason(n, -1), ub_reason(n, -1);
    for (std::size_t v = 0; v < n; ++v) {
      const Task& t = tasks_[v];
      if (t.pinned) {
        lb[v] = ub[v] = t.pinned->start_s;
      } else {
        lb[v] = std::max<Seconds>(instance_.release_s, 0);
        ub[v] = horizon_ - t.duration;
        if (s.makespan_bound != std::numeric_limits<Seconds>::max())
          ub[v] = std::min(ub[v], s.makespan_bound - t.duration);
      }
    }

    auto explain = [&](int v) {
      std::set<int> lits;
      std::vector<char> seen(n, 0);
      for (int u = v; u >= 0 && !seen[static_cast<std::size_t>(u)];) {
        seen[static_cast<std::size_t>(u)] = 1;
        int r = lb_reason[static_cast<std::size_t>(u)];
        if (r < 0) break;
        if (arcs[static_cast<std::size_t>(r)].literal >= 0) lits.insert(arcs[static_cast<std::size_t>(r)].literal);
        u = arcs[static_cast<std::size_t>(r)].from;
      }
      std::fill(seen.begin(), seen.end(), 0);
      for (int u = v; u >= 0 && !seen[static_cast<std::size_t>(u)];) {
        seen[static_cast<std::size_t>(u)] = 1;
        int r = ub_reason[static_cast<std::size_t>(u)];
        if (r < 0) break;
        if (arcs[static_cast<std::size_t>(r)].literal >= 0) lits.insert(arcs[static_cast<std::size_t>(r)].literal);
        u = arcs[static_cast<std::size_t>(r)].to;
      }
      return lits;
    };

    PropagationResult res;
    auto fail = [&](int v) {
      auto lits = explain(v);
      res.ok = false;
      res.conflict_task = v;
      res.explanation.assign(lits.begin(), lits.end());
      return res;
    };

    for (std::size_t v = 0; v < n; ++v)
      if (lb[v] > ub[v]) return fail(static_cast<int>(v));

    std::deque<int> queue;
    std::vector<char> queued(n, 1);
    for (std::size_t v = 0; v < n; ++v) queue.push_back(static_cast<int>(v));
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      queued[static_cast<std::size_t>(v)] = 0;
      for (int k : out[static_cast<std::size_t>(v)]) {
        const Arc& a = arcs[static_cast<std::size_t>(k)];
        auto to = static_cast<std::size_t>(a.to);
        if (lb[static_cast<std::size_t>(v)] + a.weight > lb[to]) {
          lb[to] = lb[static_cast<std::size_t>(v)] + a.weight;
          lb_reason[to] = k;
          if (lb[to] > ub[to]) return fail(a.to);
          if (!queued[to]) {
            queued[to] = 1;
            queue.push_back(a.to);
          }
        }
      }
      for (int k : in[static_cast<std::size_t>(v)]) {
        const Arc& a = arcs[static_cast<std::size_t>(k)];
        auto from = static_cast<std::size_t>(a.from);
        if (ub[static_cast<std::size_t>(v)] - a.weight < ub[from]) {
          ub[from] = ub[static_cast<std::size_t>(v)] - a.weight;
          ub_reason[from] = k;
          if (lb[from] > ub[from]) return fail(a.from);
          if (!queued[from]) {
            queued[from] = 1;
            queue.push_back(a.from);
          }
        }
      }
    }

    // Unit capacity: the users of a machine run one after another.
    if (s.makespan_bound != std::numeric_limits<Seconds>::max()) {
      for (const auto& users : machine_users_) {
        Seconds earliest = std::numeric_limits<Seconds>::max();
        Seconds load = 0;
        for (int v : users) {
          earliest = std::min(earliest, lb[static_cast<std::size_t>(v)]);
          load += tasks_[static_cast<std::size_t>(v)].duration;
        }
        if (earliest + load > s.makespan_bound) {
          std::set<int> lits;
          for (int v : users) {
            std::vector<char> seen(n, 0);
            for (int u = v; u >= 0 && !seen[static_cast<std::size_t>(u)];) {
              seen[static_cast<std::size_t>(u)] = 1;
              int r = lb_reason[static_cast<std::size_t>(u)];
              if (r < 0) break;
              if (arcs[static_cast<std::size_t>(r)].literal >= 0)
                lits.insert(arcs[static_cast<std::size_t>(r)].literal);
              u = arcs[static_cast<std::size_t>(r)].from;
            }
          }
          res.ok = false;
          res.conflict_task = users.front();
          res.explanation.assign(lits.begin(), lits.end());
          return res;
        }
      }
    }
    return res;
  }

  /// Earliest-start schedule (every task at its lower bound).
  Schedule earliest_schedule(const SearchState& s) const {
    Schedule out;
    for (std::size_t v = 0; v < tasks_.size(); ++v) {
      const Task& t = tasks_[v];
      Assignment a;
      if (t.pinned) a = *t.pinned;
      a.ref = t.ref;
      a.machine = t.machine;
      a.tend_machine = t.tend_machine;
      a.start_s = s.lb[v];
      a.end_s = s.lb[v] + t.duration;
      out.assignments.push_back(std::move(a));
    }
    out.finalize();
    return out;
  }

  /// True when the current bounds already force an order on the pair.
  bool entailed(const SearchState& s, int pair) const {
    auto a = static_cast<std::size_t>(pairs_[static_cast<std::size_t>(pair)].first);
    auto b = static_cast<std::size_t>(pairs_[static_cast<std::size_t>(pair)].second);
    return s.ub[a] + tasks_[a].duration <= s.lb[b] || s.ub[b] + tasks_[b].duration <= s.lb[a];
  }

 private:
  JsspInstance instance_;
  std::vector<Task> tasks_;
  std::vector<Arc> arcs_;
  std::vector<Pair> pairs_;
  std::vector<std::vector<int>> machine_users_;
  std::map<TaskRef, int> index_;
  std::map<std::pair<int, int>, int> pair_index_;
  std::vector<int> first_of_order_;
  std::vector<int> last_of_order_;
  Seconds horizon_ = 0;
};

namespace detail {

class JsspSearch {
 public:
  JsspSearch(const JsspModel& model, const SolverConfig& config)
      : model_(model), config_(config), rng_(config.random_seed),
        start_(std::chrono::steady_clock::now()) {}

  struct Outcome {
    bool found = false;
    std::vector<int> conflict;  // sorted pair indices
  };

  SolveResult run() {
    SearchState s = model_.initial_state();
    SolveResult result;
    auto root = model_.propagate(s);
    if (!root.ok) {
      result.status = SolveStatus::infeasible;
      result.diagnosis = "root propagation failed at task " +
                         to_string(model_.tasks()[static_cast<std::size_t>(root.conflict_task)].ref);
      return result;
    }
    search(s);
    result.stats = s.stats;
    result.schedule = s.incumbent;
    if (aborted_) {
      result.status = SolveStatus::timed_out;
      result.diagnosis = "search budget exhausted";
    } else if (s.incumbent) {
      result.status = SolveStatus::optimal;
    } else {
      result.status = SolveStatus::infeasible;
      result.diagnosis = "search exhausted without a feasible schedule";
    }
    return result;
  }

 private:
  bool out_of_budget(const SearchState& s) {
    if (aborted_) return true;
    if (s.stats.nodes >= config_.node_budget) aborted_ = true;
    if ((s.stats.nodes & 255) == 0) {
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start_)
                    .count();
      if (ms >= config_.time_budget_ms) aborted_ = true;
    }
    return aborted_;
  }

  int select(const SearchState& s) const {
    const auto& tasks = model_.tasks();
    int best = -1;
    std::tuple<Seconds, Seconds, TaskRef, TaskRef> best_key{};
    for (std::size_t p = 0; p < model_.pairs().size(); ++p) {
      if (s.literal[p] != 0 || model_.entailed(s, static_cast<int>(p))) continue;
      auto a = static_cast<std::size_t>(model_.pairs()[p].first);
      auto b = static_cast<std::size_t>(model_.pairs()[p].second);
      Seconds primary = 0;
      if (config_.branching == Branching::smallest_domain_first)
        primary = std::min(s.ub[a] - s.lb[a], s.ub[b] - s.lb[b]);
      else
        primary = std::min(s.ub[a] + tasks[a].duration, s.ub[b] + tasks[b].duration);
      auto key = std::make_tuple(primary, std::min(s.lb[a], s.lb[b]), tasks[a].ref, tasks[b].ref);
      if (best < 0 || key < best_key) {
        best = static_cast<int>(p);
        best_key = key;
      }
    }
    return best;
  }

  Outcome search(SearchState& s) {
    Outcome out;
    if (out_of_budget(s)) return out;
    ++s.stats.nodes;
    auto prop = model_.propagate(s);
    if (!prop.ok) {
      ++s.stats.conflicts;
      out.conflict = std::move(prop.explanation);
      return out;
    }
    int p = select(s);
    if (p < 0) {
      Schedule sched = model_.earliest_schedule(s);
      s.incumbent = sched;
      s.makespan_bound = sched.makespan_s - 1;
      ++s.stats.solutions;
      out.found = true;
      return out;
    }

    const auto& tasks = model_.tasks();
    auto a = static_cast<std::size_t>(model_.pairs()[static_cast<std::size_t>(p)].first);
    auto b = static_cast<std::size_t>(model_.pairs()[static_cast<std::size_t>(p)].second);
    auto key_a = std::make_tuple(s.lb[a], s.lb[a] + tasks[a].duration);
    auto key_b = std::make_tuple(s.lb[b], s.lb[b] + tasks[b].duration);
    bool first_a = key_a < key_b || (key_a == key_b && tasks[a].ref < tasks[b].ref);
    if (key_a == key_b && config_.random_seed != 0) first_a = (rng_() & 1) != 0;

    std::set<int> conflict;
    for (bool value : {first_a, !first_a}) {
      s.decide(p, value);
      Outcome child = search(s);
      s.undo();
      if (aborted_) return out;
      if (child.found) {
        out.found = true;
        continue;
      }
      if (!std::binary_search(child.conflict.begin(), child.conflict.end(), p)) {
        // The failure does not depend on this literal: skip its sibling.
        ++s.stats.backjumps;
        if (out.found) return out;
        return child;
      }
      for (int lit : child.conflict)
        if (lit != p) conflict.insert(lit);
    }
    if (!out.found) out.conflict.assign(conflict.begin(), conflict.end());
    return out;
  }

  const JsspModel& model_;
  SolverConfig config_;
  std::mt19937_64 rng_;
  std::chrono::steady_clock::time_point start_;
  bool aborted_ = false;
};

}  // namespace detail

/// Minimizes the makespan of `instance` (see file comment). Returns
/// optimal / infeasible / timed_out with the best incumbent.
inline SolveResult solve(const JsspInstance& instance, const SolverConfig& config = {}) {
  if (config.time_budget_ms <= 0 || config.node_budget <= 0)
    throw Error("solver budgets must be positive");
  JsspModel model(instance);
  detail::JsspSearch search(model, config);
  return search.run();
}

// ----- Oracle -----

inline constexpr std::size_t kBruteForceMaxTasks = 12;
inline constexpr std::uint64_t kBruteForceMaxSequences = 5'000'000;

/// Exhaustive minimum-makespan schedule for instances of at most 12
/// tasks: every interleaving of the order chains fixes the order of all
/// conflicting pairs, and its earliest-start schedule is computed by
/// Bellman-Ford longest paths. Returns std::nullopt when infeasible.
/// Throws `Error` when the instance is too large.
inline std::optional<Schedule> brute_force(const JsspInstance& instance) {
  struct Node {
    TaskRef ref;
    const TaskSpec* spec;
    std::optional<Assignment> pin;
  };
  std::vector<const Order*> orders;
  for (const auto& o : instance.orders) orders.push_back(&o);
  std::sort(orders.begin(), orders.end(),
            [](const Order* a, const Order* b) { return a->recipe < b->recipe; });

  std::vector<Node> nodes;
  std::vector<std::vector<int>> chains;
  for (const Order* o : orders) {
    chains.emplace_back();
    for (const auto& t : o->tasks) {
      Node nd{{o->recipe, t.index}, &t, std::nullopt};
      for (const auto& p : instance.pinned)
        if (p.ref == nd.ref) nd.pin = p;
      chains.back().push_back(static_cast<int>(nodes.size()));
      nodes.push_back(nd);
    }
  }
  const std::size_t n = nodes.size();
  if (n > kBruteForceMaxTasks) throw Error("instance too large for brute force");

  // Multinomial count of interleavings.
  {
    double count = 1;
    std::size_t placed = 0;
    for (const auto& c : chains) {
      for (std::size_t k = 1; k <= c.size(); ++k) count = count * static_cast<double>(placed + k) / static_cast<double>(k);
      placed += c.size();
    }
    if (count > static_cast<double>(kBruteForceMaxSequences))
      throw Error("instance too large for brute force");
  }

  std::set<MachinePair> incompatible;
  for (const auto& p : instance.incompatible_pairs) incompatible.insert(normalized(p));
  std::vector<std::vector<char>> conflicts(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || nodes[a].ref.recipe == nodes[b].ref.recipe) continue;
      auto ra = nodes[a].spec->resources(), rb = nodes[b].spec->resources();
      bool c = false;
      for (const auto& m : ra)
        for (const auto& k : rb)
          if (m == k || incompatible.count(normalized({m, k}))) c = true;
      conflicts[a][b] = c;
    }

  struct Edge {
    std::size_t from, to;
    Seconds w;
  };
  std::vector<Edge> fixed;
  for (std::size_t k = 0; k < chains.size(); ++k) {
    const auto& c = chains[k];
    if (c.empty()) continue;
    for (std::size_t j = 1; j < c.size(); ++j)
      fixed.push_back({static_cast<std::size_t>(c[j - 1]), static_cast<std::size_t>(c[j]),
                       nodes[static_cast<std::size_t>(c[j - 1])].spec->duration_s});
    auto first = static_cast<std::size_t>(c.front()), last = static_cast<std::size_t>(c.back());
    if (!(nodes[first].pin && nodes[last].pin))
      fixed.push_back({last, first, nodes[last].spec->duration_s - orders[k]->deadline_s});
    if (k > 0 && !chains[k - 1].empty()) {
      auto prev = static_cast<std::size_t>(chains[k - 1].back());
      if (!(nodes[prev].pin && nodes[last].pin))
        fixed.push_back({prev, last, nodes[prev].spec->duration_s + 1 - nodes[last].spec->duration_s});
    }
  }

  std::optional<Schedule> best;
  std::vector<int> sequence;
  std::vector<std::size_t> next(chains.size(), 0);
  std::vector<std::size_t> position(n, 0);

  auto evaluate = [&]() {
    for (std::size_t k = 0; k < sequence.size(); ++k) position[static_cast<std::size_t>(sequence[k])] = k;
    std::vector<Edge> edges = fixed;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (conflicts[a][b] && position[a] < position[b] && !(nodes[a].pin && nodes[b].pin))
          edges.push_back({a, b, nodes[a].spec->duration_s});
    std::vector<Seconds> x(n);
    for (std::size_t v = 0; v < n; ++v)
      x[v] = nodes[v].pin ? nodes[v].pin->start_s : std::max<Seconds>(instance.release_s, 0);
    bool changed = true;
    for (std::size_t iter = 0; iter <= n && changed; ++iter) {
      changed = false;
      for (const auto& e : edges)
        if (x[e.from] + e.w > x[e.to]) {
          x[e.to] = x[e.from] + e.w;
          changed = true;
        }
    }
    if (changed) return;  // positive cycle
    for (std::size_t v = 0; v < n; ++v)
      if (nodes[v].pin && x[v] != nodes[v].pin->start_s) return;
    Seconds makespan = 0;
    for (std::size_t v = 0; v < n; ++v) makespan = std::max(makespan, x[v] + nodes[v].spec->duration_s);
    if (best && best->makespan_s <= makespan) return;
    Schedule s;
    for (std::size_t v = 0; v < n; ++v) {
      Assignment a;
      if (nodes[v].pin) a = *nodes[v].pin;
      a.ref = nodes[v].ref;
      a.machine = nodes[v].spec->machine;
      a.tend_machine = nodes[v].spec->tend_machine;
      a.start_s = x[v];
      a.end_s = x[v] + nodes[v].spec->duration_s;
      s.assignments.push_back(a);
    }
    s.finalize();
    best = std::move(s);
  };

  auto recurse = [&](auto&& self) -> void {
    if (sequence.size() == n) {
      evaluate();
      return;
    }
    for (std::size_t k = 0; k < chains.size(); ++k) {
      if (next[k] >= chains[k].size()) continue;
      sequence.push_back(chains[k][next[k]]);
      ++next[k];
      self(self);
      --next[k];
      sequence.pop_back();
    }
  };
  recurse(recurse);
  return best;
}

}  // namespace kcell

#endif  // KCELL_JSSP_HPP_
