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

// kcell: command-line front end for scheduling, simulation, trajectories,
// layout search, arm sizing and the engine service.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>

#include "kcell/kcell.hpp"

namespace {

using namespace kcell;

// Exit codes.
constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;
constexpr int kTimedOutWithIncumbent = 3;
constexpr int kTimedOutEmpty = 4;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

struct ScheduleArgs {
  std::string recipes, machines, format = "json", out;
  std::uint64_t seed = 0;
  std::int64_t budget_ms = 10'000;
};

int run_schedule(const ScheduleArgs& a) {
  Kitchen k = load_kitchen(a.machines);
  RecipeBook book = load_recipes(a.recipes, &k);
  JsspInstance inst{instantiate(book), k.machines, k.incompatible_pairs, {}, 0};
  SolverConfig cfg;
  cfg.time_budget_ms = a.budget_ms;
  cfg.random_seed = a.seed;
  SolveResult r = solve(inst, cfg);
  std::cerr << "status " << to_string(r.status) << ", " << r.stats.nodes << " nodes";
  if (r.schedule) std::cerr << ", makespan " << r.schedule->makespan_s << " s";
  std::cerr << "\n";
  if (!r.diagnosis.empty()) std::cerr << r.diagnosis << "\n";

  if (r.schedule) {
    auto rows = gantt_rows(*r.schedule, k.machines, inst.orders);
    if (a.format == "gantt-text") {
      write_output(a.out, gantt_text(rows));
    } else if (a.format == "svg") {
      write_output(a.out, gantt_svg(rows));
    } else {
      Json j{{"schema", kSchema},
             {"status", to_string(r.status)},
             {"schedule", to_json(*r.schedule)},
             {"stats", {{"nodes", r.stats.nodes}, {"conflicts", r.stats.conflicts}, {"solutions", r.stats.solutions}}}};
      write_output(a.out, j.dump(2) + "\n");
    }
  } else if (a.format == "json") {
    Json j{{"schema", kSchema}, {"status", to_string(r.status)}, {"diagnosis", r.diagnosis}};
    write_output(a.out, j.dump(2) + "\n");
  }
  switch (r.status) {
    case SolveStatus::optimal: return kOk;
    case SolveStatus::infeasible: return kInfeasible;
    case SolveStatus::timed_out: return r.schedule ? kTimedOutWithIncumbent : kTimedOutEmpty;
  }
  return kInfeasible;
}

struct SimulateArgs {
  std::string scenario, events_out, format = "summary";
  std::optional<std::uint64_t> seed;
  std::optional<Seconds> until_s;
};

int run_simulate(const SimulateArgs& a) {
  Scenario s = load_scenario(a.scenario);
  if (a.seed) s.seed = *a.seed;
  if (a.until_s) s.until_s = *a.until_s;
  Engine e = Engine::from_scenario(s);
  e.run(s.until_s);
  if (!a.events_out.empty()) write_output(a.events_out, to_ndjson(e.log()));
  const PlannerState& st = e.state();
  std::size_t failed = 0;
  for (const auto& c : st.canceled) failed += c.status == TaskStatus::failed;
  std::cerr << s.name << ": " << (e.done() ? "done" : "horizon reached") << " at " << e.clock() - 1 << " s, "
            << st.finished.size() << " finished, " << st.canceled.size() - failed << " canceled, " << failed
            << " failed, " << st.reschedules << " reschedules, " << e.log().size() << " events\n";
  auto rows = gantt_rows(st.schedule, st.machines, st.orders);
  if (a.format == "gantt-text")
    std::cout << gantt_text(rows);
  else if (a.format == "svg")
    std::cout << gantt_svg(rows);
  else if (a.format == "json")
    std::cout << Json{{"schema", kSchema}, {"schedule", to_json(st.schedule)}}.dump(2) << "\n";
  return e.done() ? kOk : kTimedOutWithIncumbent;
}

int run_trajectory(const std::string& path, const std::string& out, std::optional<std::string> norm) {
  TrajectoryFile f = load_trajectory(path);
  if (norm) f.norm = *norm == "linf" ? JerkNorm::linf : JerkNorm::l2;
  Trajectory t = f.norm == JerkNorm::linf ? solve_min_jerk_linf(f.problem) : solve_min_jerk(f.problem);
  const int dims = f.problem.dims;
  std::string csv = "t";
  for (int d = 0; d < dims; ++d) {
    std::string s = dims == 1 ? "" : std::to_string(d);
    csv += ",x" + s + ",xd" + s + ",xdd" + s + ",xddd" + s;
  }
  csv += "\n";
  char buf[64];
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9g", t.times[k]);
    csv += buf;
    const auto i = static_cast<Eigen::Index>(k);
    for (int d = 0; d < dims; ++d)
      for (const Eigen::MatrixXd* m : {&t.position, &t.velocity, &t.acceleration, &t.jerk}) {
        std::snprintf(buf, sizeof buf, ",%.12g", (*m)(i, d));
        csv += buf;
      }
    csv += "\n";
  }
  write_output(out, csv);
  std::cerr << "jerk L2 " << t.jerk_l2 << ", jerk max " << t.jerk_linf << ", accel L2 " << t.acceleration_l2
            << ", constraint residual " << t.constraint_residual << "\n";
  return kOk;
}

Json layout_json(const LayoutProblem& p, const Layout& l) {
  Json places = Json::array();
  for (std::size_t i = 0; i < l.placements.size(); ++i) {
    const auto& pl = l.placements[i];
    Eigen::Vector3d key = key_point(p.appliances[i], pl);
    places.push_back({{"name", p.appliances[i].name},
                      {"x", pl.x},
                      {"y", pl.y},
                      {"yaw", pl.yaw},
                      {"key_point", {key.x(), key.y(), key.z()}}});
  }
  Json overlaps = Json::array();
  for (const auto& o : l.report.overlaps)
    overlaps.push_back({{"body", o.body}, {"other", o.other}, {"corridor", o.corridor}, {"depth", o.depth}});
  Json outside = Json::array();
  for (const auto& e : l.report.ellipsoid) outside.push_back({{"appliance", e.appliance}, {"excess", e.excess}});
  return {{"schema", kSchema},
          {"J", l.report.J},
          {"feasible", l.report.feasible()},
          {"placements", places},
          {"overlaps", overlaps},
          {"ellipsoid", outside}};
}

int run_layout(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out) {
  LayoutFile f = load_layout(path);
  try {
    Layout l = optimize_layout(f.problem, seed.value_or(f.seed), f.config);
    write_output(out, layout_json(f.problem, l).dump(2) + "\n");
    return kOk;
  } catch (const NoFeasibleFound& e) {
    std::cerr << e.what() << "\n";
    write_output(out, layout_json(f.problem, e.best()).dump(2) + "\n");
    return kInfeasible;
  }
}

int run_arm(double payload_kg, double factor) {
  ArmModel m = ArmModel::defaults();
  m.validate();
  Eigen::Vector3d tau = static_worstcase_torques(m, payload_kg, factor);
  bool ok = true;
  std::printf("%-15s %10s %10s %10s\n", "joint", "torque_nm", "peak_nm", "actuator");
  for (int j = 0; j < 3; ++j) {
    const ActuatorType& a = m.actuator_for(kPitchJoints[static_cast<std::size_t>(j)]);
    ok = ok && tau(j) <= a.peak_nm;
    std::printf("%-15s %10.3f %10.1f %10s\n", kPitchJoints[static_cast<std::size_t>(j)], tau(j), a.peak_nm,
                a.name.c_str());
  }
  return ok ? kOk : kInfeasible;
}

struct ServeArgs {
  std::string kitchen, recipes, scenario, events_out, listen;
  double rate = 1.0;
  bool paused = false;
  std::uint64_t seed = 0;
};

int run_serve(const ServeArgs& a) {
  ListenAddress at = a.listen.empty() ? listen_from_env() : parse_listen(a.listen.c_str());
  std::optional<Engine> engine;
  std::optional<RecipeBook> book;
  if (!a.scenario.empty()) {
    Scenario s = load_scenario(a.scenario);
    book = s.recipes;
    engine.emplace(Engine::from_scenario(s));
  } else {
    if (a.kitchen.empty()) throw Error("serve needs --kitchen or --scenario");
    Kitchen k = load_kitchen(a.kitchen);
    if (!a.recipes.empty()) book = load_recipes(a.recipes, &k);
    EngineConfig c;
    c.planner.solver = engine_solver();
    c.seed = a.seed;
    engine.emplace(std::move(k), c);
  }

  // Signals go to a dedicated thread so shutdown runs outside a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(std::move(*engine), std::move(book), {a.rate, !a.paused, a.events_out});
  int port = service.bind(at);
  std::cerr << "listening on " << at.host << ":" << port << " (rate " << a.rate << "x"
            << (a.paused ? ", paused" : "") << ")\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.serve();
  // Wake the waiter if the server stopped on its own.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kcell: robotic kitchen cell scheduling and simulation"};
  app.require_subcommand(1);

  ScheduleArgs sched;
  auto* s = app.add_subcommand("schedule", "solve the job-shop schedule for a recipe set");
  s->add_option("recipes", sched.recipes, "recipes file")->required()->check(CLI::ExistingFile);
  s->add_option("machines", sched.machines, "kitchen (machines) file")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sched.seed, "solver tie-break seed");
  s->add_option("--budget-ms", sched.budget_ms, "solver time budget")->check(CLI::PositiveNumber);
  s->add_option("--format", sched.format, "output format")->check(CLI::IsMember({"json", "gantt-text", "svg"}));
  s->add_option("-o,--out", sched.out, "output file (default stdout)");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "run a scenario through the replanner and simulator");
  m->add_option("scenario", sim.scenario, "scenario file")->required()->check(CLI::ExistingFile);
  m->add_option("--seed", sim.seed, "override the scenario seed");
  m->add_option("--until-s", sim.until_s, "simulation horizon (s)");
  m->add_option("--events-out", sim.events_out, "write the NDJSON event log here ('-' for stdout)");
  m->add_option("--format", sim.format, "final schedule on stdout")
      ->check(CLI::IsMember({"summary", "json", "gantt-text", "svg"}));

  std::string traj_path, traj_out;
  std::optional<std::string> traj_norm;
  auto* t = app.add_subcommand("trajectory", "minimum-jerk trajectory through via points, as CSV");
  t->add_option("problem", traj_path, "trajectory file")->required()->check(CLI::ExistingFile);
  t->add_option("--norm", traj_norm, "jerk norm")->check(CLI::IsMember({"l2", "linf"}));
  t->add_option("-o,--out", traj_out, "output file (default stdout)");

  std::string layout_path, layout_out;
  std::optional<std::uint64_t> layout_seed;
  auto* l = app.add_subcommand("layout", "appliance placement search");
  l->add_option("problem", layout_path, "layout file")->required()->check(CLI::ExistingFile);
  l->add_option("--seed", layout_seed, "override the file seed");
  l->add_option("-o,--out", layout_out, "output file (default stdout)");

  double payload = 3.0, factor = 1.5;
  auto* a = app.add_subcommand("arm", "static pitch-joint torques against actuator ratings");
  a->add_option("--payload-kg", payload, "tip payload")->check(CLI::NonNegativeNumber);
  a->add_option("--factor", factor, "safety factor")->check(CLI::Range(1.0, 100.0));

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "run the engine behind the HTTP service (address from KCELL_LISTEN)");
  v->add_option("--kitchen", serve.kitchen, "kitchen file")->check(CLI::ExistingFile);
  v->add_option("--recipes", serve.recipes, "recipes orderable by name")->check(CLI::ExistingFile);
  v->add_option("--scenario", serve.scenario, "start from a scenario instead")->check(CLI::ExistingFile);
  v->add_option("--rate", serve.rate, "sim seconds per wall second")->check(CLI::PositiveNumber);
  v->add_flag("--paused", serve.paused, "start with the clock stopped");
  v->add_option("--events-out", serve.events_out, "append the NDJSON event log here");
  v->add_option("--seed", serve.seed, "simulator seed");
  v->add_option("--listen", serve.listen, "host:port, overrides KCELL_LISTEN");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }
  try {
    if (*s) return run_schedule(sched);
    if (*m) return run_simulate(sim);
    if (*t) return run_trajectory(traj_path, traj_out, traj_norm);
    if (*l) return run_layout(layout_path, layout_seed, layout_out);
    if (*a) return run_arm(payload, factor);
    if (*v) return run_serve(serve);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
