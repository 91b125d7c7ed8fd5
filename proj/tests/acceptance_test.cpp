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

// Acceptance checks: one PASS/FAIL line per primary criterion. Oracles
// are independent of the code under test wherever one is practical.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "instance_gen.hpp"
#include "kcell/arm.hpp"
#include "kcell/engine.hpp"
#include "kcell/jssp.hpp"
#include "kcell/layout.hpp"
#include "kcell/trajectory.hpp"

namespace {

using namespace kcell;

const std::string kData = KCELL_DATA_DIR;
constexpr double kPi = 3.14159265358979323846;

struct Criterion {
  std::string name;
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << why << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ----- scheduler -----

void scheduler_optimality(Criterion& c) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(424242);
  int agree = 0, infeasible = 0;
  for (int trial = 0; trial < 100; ++trial) {
    JsspInstance inst = kcell::testing::random_instance(rng);
    auto oracle = brute_force(inst);
    auto r = solve(inst);
    if (!oracle) {
      ++infeasible;
      agree += r.status == SolveStatus::infeasible;
    } else {
      agree += r.status == SolveStatus::optimal && r.schedule->makespan_s == oracle->makespan_s &&
               check_schedule(inst.orders, inst.machines, inst.incompatible_pairs, *r.schedule).empty();
    }
  }
  double secs = seconds_since(t0);
  c.detail << agree << "/100 agree with brute force (" << infeasible << " infeasible), " << secs << " s";
  c.require(agree == 100, "mismatch");
  c.require(secs < 60, "runtime");
}

void parallel_efficiency(Criterion& c) {
  auto t0 = std::chrono::steady_clock::now();
  Kitchen k = load_kitchen(kData + "/kitchen.json");
  RecipeBook book = load_recipes(kData + "/recipes/steak_frites.json", &k);
  std::vector<Seconds> makespan;
  for (int dishes = 1; dishes <= 3; ++dishes) {
    std::vector<Order> orders;
    for (int d = 0; d < dishes; ++d)
      for (const char* name : {"steak", "fries"})
        orders.push_back(numbered(*book.find(name), static_cast<int>(orders.size())));
    auto r = solve({orders, k.machines, k.incompatible_pairs, {}, 0});
    makespan.push_back(r.schedule && r.status == SolveStatus::optimal ? r.schedule->makespan_s : -1);
  }
  double secs = seconds_since(t0);
  c.detail << "makespan 1/2/3 dishes " << makespan[0] << "/" << makespan[1] << "/" << makespan[2]
           << " s, per dish " << makespan[0] << "/" << makespan[1] / 2.0 << "/" << makespan[2] / 3.0 << ", " << secs
           << " s";
  c.require(makespan[0] > 0 && makespan[1] > 0 && makespan[2] > 0, "not solved to optimality");
  c.require(makespan[1] * 1 <= makespan[0] * 2 && makespan[2] * 2 <= makespan[1] * 3, "per-dish time increases");
  c.require(makespan[1] < 2 * makespan[0], "no parallel gain");
  c.require(secs < 10, "runtime");
}

// ----- scenarios -----

struct Session {
  Scenario scenario;
  Engine engine;
};

Session run_scenario(const std::string& name) {
  Scenario s = load_scenario(kData + "/scenarios/" + name + ".json");
  Engine e = Engine::from_scenario(s);
  e.run(s.until_s);
  return {s, std::move(e)};
}

std::vector<KitchenEvent> of_kind(const std::vector<KitchenEvent>& log, EventKind k) {
  std::vector<KitchenEvent> out;
  for (const auto& e : log)
    if (e.kind == k) out.push_back(e);
  return out;
}

void scenario_replays(Criterion& c) {
  // (a) zero cancellations.
  Session a = run_scenario("base");
  bool a_ok = a.engine.done() && a.engine.state().canceled.empty() &&
              of_kind(a.engine.log(), EventKind::task_canceled).empty() && a.engine.state().finished.size() == 15;
  c.detail << "(a) " << a.engine.state().finished.size() << " done, " << a.engine.state().canceled.size()
           << " canceled";
  c.require(a_ok, "base scenario");

  // (b) the dicer dies: exactly the fries tasks from dicing on are dropped,
  // since every one of them follows the dicing step.
  Session b = run_scenario("dicing_fault");
  const auto& sb = b.engine.state();
  std::set<TaskRef> dropped, expect;
  for (const auto& x : sb.canceled) dropped.insert(x.ref);
  const Order* fries = sb.order(1);
  int dicing = -1;
  for (const auto& t : fries->tasks)
    if (dicing < 0 && (t.machine == "food_processor" || t.tend_machine == "food_processor")) dicing = t.index;
  for (const auto& t : fries->tasks)
    if (t.index >= dicing) expect.insert(t.ref());
  bool steak_done = true;
  for (const auto& t : sb.order(0)->tasks) {
    bool found = false;
    for (const auto& f : sb.finished) found |= f.ref == t.ref();
    steak_done &= found;
  }
  c.detail << "; (b) " << dropped.size() << " fries tasks dropped, steak " << (steak_done ? "complete" : "incomplete");
  c.require(b.engine.done() && dropped == expect && steak_done, "dicing fault");

  // (c) one reschedule after the new order, pins unmoved, all complete.
  Session cc = run_scenario("second_order");
  const auto& log = cc.engine.log();
  auto placed = of_kind(log, EventKind::order_placed);
  int after = 0;
  const Rescheduled* mid = nullptr;
  for (const auto& e : log)
    if (e.kind == EventKind::reschedule && placed.size() == 3 && e.seq > placed[2].seq) {
      ++after;
      mid = &std::get<Rescheduled>(e.payload);
    }
  bool pins = mid != nullptr;
  if (mid) {
    for (const auto& e : log) {
      if (e.seq > placed[2].seq) break;
      if (e.kind != EventKind::task_started) continue;
      const auto& p = std::get<TaskPayload>(e.payload);
      const Assignment* x = mid->schedule.find(p.task);
      if (!x || (x->tries == p.tries && x->start_s != e.at_s())) pins = false;
    }
  }
  bool all = cc.engine.done() && cc.engine.state().canceled.empty() && cc.engine.state().finished.size() == 23;
  c.detail << "; (c) " << after << " reschedule after the new order, pins " << (pins ? "kept" : "moved") << ", "
           << cc.engine.state().finished.size() << " done";
  c.require(after == 1 && pins && all, "mid-run order");

  // Byte-identical logs under the fixed seed.
  bool identical = true;
  for (const char* name : {"base", "dicing_fault", "second_order"})
    identical &= to_ndjson(run_scenario(name).engine.log()) == to_ndjson(run_scenario(name).engine.log());
  c.detail << "; logs " << (identical ? "byte-identical" : "differ");
  c.require(identical, "replay determinism");
}

// ----- trajectories -----

TrajectoryProblem rest_to_rest(int samples) {
  TrajectoryProblem p;
  p.duration_s = 1.0;
  p.samples = samples;
  p.dims = 1;
  p.start = {{0, 0, 0}};
  p.goal = {{1, 0, 0}};
  return p;
}

double quintic_error(int samples) {
  Trajectory t = solve_min_jerk(rest_to_rest(samples));
  double err = 0;
  for (int k = 0; k < samples; ++k) {
    double tau = t.times[static_cast<std::size_t>(k)];
    err = std::max(err, std::abs(t.position(k, 0) - tau * tau * tau * (10 - 15 * tau + 6 * tau * tau)));
  }
  return err;
}

void min_jerk_oracle(Criterion& c) {
  double e64 = quintic_error(64);
  c.detail << "max error at N=64 " << e64 << "; contraction";
  c.require(e64 <= 1e-6, "error");
  for (int n : {16, 32, 64}) {
    double ratio = quintic_error(n) / quintic_error(2 * n);
    c.detail << " " << n << "->" << 2 * n << ": " << ratio << "x";
    c.require(ratio >= 2.8, "contraction");
  }
}

void via_ordering(Criterion& c) {
  TrajectoryFile f = load_trajectory(kData + "/trajectory/fryer_basket.json");
  TrajectoryProblem p = f.problem;
  p.alpha = 0.0;
  Trajectory plain = solve_min_jerk(p);
  p.alpha = 0.01;
  Trajectory weighted = solve_min_jerk(p);
  Trajectory linf = solve_min_jerk_linf(p);
  c.detail << "accel L2 " << weighted.acceleration_l2 << " (a=0.01) vs " << plain.acceleration_l2
           << " (a=0); residuals " << weighted.constraint_residual << ", " << plain.constraint_residual
           << "; max jerk Linf " << linf.jerk_linf << " vs L2 " << plain.jerk_linf;
  c.require(weighted.acceleration_l2 < plain.acceleration_l2, "weighted acceleration not smaller");
  c.require(plain.constraint_residual <= 1e-8 && weighted.constraint_residual <= 1e-8 &&
                linf.constraint_residual <= 1e-8,
            "constraints");
  c.require(linf.jerk_linf <= plain.jerk_linf && linf.jerk_linf <= weighted.jerk_linf, "Linf dominance");
}

// ----- arm -----

JointState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-kPi, kPi), rate(-3, 3);
  JointState s;
  for (int i = 0; i < 3; ++i) {
    s.q(i) = angle(rng);
    s.qd(i) = rate(rng);
    s.qdd(i) = rate(rng);
  }
  return s;
}

// Potential energy summed over every point mass of the default arm.
double potential(const ArmModel& m, const Eigen::Vector3d& q) {
  const double L0 = m.links[2].length_m, L1 = m.links[3].length_m, L2 = m.links[4].length_m;
  double t0 = q(0), t1 = q(0) + q(1), t2 = q(0) + q(1) + q(2);
  double elbow = L0 * std::sin(t0), wrist = elbow + L1 * std::sin(t1);
  double V = m.links[2].mass_kg * 0.5 * L0 * std::sin(t0);
  V += m.links[3].mass_kg * (elbow + 0.5 * L1 * std::sin(t1));
  V += m.links[4].mass_kg * (wrist + 0.5 * L2 * std::sin(t2));
  V += 0.5 * wrist;  // wrist pitch and roll actuators
  V += m.tip_mass_kg * (wrist + L2 * std::sin(t2));
  return V * m.gravity;
}

void dynamics_identities(Criterion& c) {
  std::mt19937_64 rng(2026);
  ArmModel m = ArmModel::defaults();
  m.tip_mass_kg = 1.5;
  double rnea_static = 0, impedance_static = 0, grad = 0, min_eig = std::numeric_limits<double>::infinity(), asym = 0;
  for (int k = 0; k < 1000; ++k) {
    JointState s = random_state(rng);
    Eigen::Matrix3d M = mass_matrix(m, s.q);
    asym = std::max(asym, (M - M.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(M).eigenvalues().minCoeff());
    if (k >= 200) continue;
    JointState rest{s.q, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    Eigen::Vector3d g = gravity_torque(m, s.q);
    rnea_static = std::max(rnea_static, (inverse_dynamics(m, rest) - g).cwiseAbs().maxCoeff());
    CartesianTarget at;
    at.x_d = forward_kinematics(m, s.q);
    at.K = 800 * Eigen::Matrix3d::Identity();
    at.D = 40 * Eigen::Matrix3d::Identity();
    impedance_static = std::max(impedance_static, (impedance_torque(m, rest, at) - g).cwiseAbs().maxCoeff());
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d qp = s.q, qm = s.q;
      qp(j) += 1e-6;
      qm(j) -= 1e-6;
      grad = std::max(grad, std::abs(g(j) - (potential(m, qp) - potential(m, qm)) / 2e-6));
    }
  }
  c.detail << "static |tau - g|: recursion " << rnea_static << ", impedance " << impedance_static << "; |g - dV/dq| " << grad
           << "; min eig M " << min_eig << " over 1000 states";
  c.require(rnea_static == 0.0 && impedance_static == 0.0, "static reduction not exact");
  c.require(grad <= 1e-5, "gravity gradient");
  c.require(asym == 0.0 && min_eig > 0, "mass matrix not SPD");
}

void static_torque(Criterion& c) {
  ArmModel m = ArmModel::defaults();
  Eigen::Vector3d t3 = static_worstcase_torques(m, 3.0, 1.5);
  Eigen::Vector3d t5 = static_worstcase_torques(m, 5.0, 1.0);
  const double paper[3] = {37.93, 20.29, 3.75};
  c.detail << "3 kg x1.5:";
  for (int j = 0; j < 3; ++j)
    c.detail << " " << t3(j) << " (ref " << paper[j] << ", " << 100 * (t3(j) - paper[j]) / paper[j] << "%)";
  c.require(t3(0) > t3(1) && t3(1) > t3(2), "not decreasing");
  c.detail << "; 5 kg x1:";
  for (int j = 0; j < 3; ++j) {
    double peak = m.actuator_for(kPitchJoints[static_cast<std::size_t>(j)]).peak_nm;
    c.detail << " " << t5(j) << "/" << peak;
    c.require(t5(j) <= peak, std::string(kPitchJoints[static_cast<std::size_t>(j)]) + " over peak");
  }
}

// ----- layout -----

Obb random_obb(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-1.0, 1.0), ext(0.1, 0.8);
  Obb o;
  o.center = Eigen::Vector3d(pos(rng), pos(rng), pos(rng));
  o.half_extents = Eigen::Vector3d(ext(rng), ext(rng), ext(rng));
  Eigen::Vector4d q(pos(rng), pos(rng), pos(rng), pos(rng));
  o.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
  return o;
}

// True when a point of `a`'s n^3 lattice (surfaces included) lies inside `b`.
bool lattice_hits(const Obb& a, const Obb& b, int n) {
  Eigen::Matrix3d Rt = b.rotation.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Eigen::Vector3d s(-1 + 2.0 * i / (n - 1), -1 + 2.0 * j / (n - 1), -1 + 2.0 * k / (n - 1));
        Eigen::Vector3d local = Rt * (a.center + a.rotation * a.half_extents.cwiseProduct(s) - b.center);
        if ((local.cwiseAbs().array() < b.half_extents.array()).all()) return true;
      }
  return false;
}

void obb_oracle(Criterion& c) {
  std::mt19937_64 rng(1000);
  int agree = 0, overlapping = 0;
  double sym = 0, rigid = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Obb a = random_obb(rng), b = random_obb(rng);
    double d = obb_overlap(a, b);
    bool oracle = lattice_hits(a, b, 24) || lattice_hits(b, a, 24);
    agree += (d > 0) == oracle;
    overlapping += oracle;
    sym = std::max(sym, std::abs(d - obb_overlap(b, a)));
    Obb r = random_obb(rng);
    Eigen::Vector3d t = 5 * r.center;
    Obb a2 = a, b2 = b;
    a2.center = r.rotation * a.center + t;
    a2.rotation = r.rotation * a.rotation;
    b2.center = r.rotation * b.center + t;
    b2.rotation = r.rotation * b.rotation;
    rigid = std::max(rigid, std::abs(obb_overlap(a2, b2) - d));
  }
  c.detail << agree << "/1000 agree (" << overlapping << " overlapping); symmetry " << sym << ", rigid motion "
           << rigid;
  c.require(agree >= 998, "oracle agreement");
  c.require(sym <= 1e-9 && rigid <= 1e-9, "invariance");
}

// Exhaustive search over a lattice of positions at the fixed yaws, using
// pairwise feasibility (every constraint involves two appliances).
double layout_grid_oracle(const LayoutProblem& p, double step) {
  struct Cand {
    Placement pl;
    double d;
  };
  const std::size_t n = p.appliances.size();
  std::vector<std::vector<Cand>> cands(n);
  const int lo_x = static_cast<int>(std::ceil(p.region_min.x() / step - 1e-9));
  const int hi_x = static_cast<int>(std::floor(p.region_max.x() / step + 1e-9));
  const int lo_y = static_cast<int>(std::ceil(p.region_min.y() / step - 1e-9));
  const int hi_y = static_cast<int>(std::floor(p.region_max.y() / step + 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p.appliances[i];
    for (int x = lo_x; x <= hi_x; ++x)
      for (int y = lo_y; y <= hi_y; ++y) {
        Placement pl{x * step, y * step, *a.fixed_yaw};
        Eigen::Vector3d e = key_point(a, pl) - p.v;
        if (e.dot(p.A * e) <= 1) cands[i].push_back({pl, e.norm()});
      }
    std::sort(cands[i].begin(), cands[i].end(), [](const Cand& l, const Cand& r) { return l.d < r.d; });
  }
  auto pair_ok = [&](std::size_t i, const Placement& pi, std::size_t j, const Placement& pj) {
    LayoutProblem sub = p;
    sub.appliances = {p.appliances[i], p.appliances[j]};
    return evaluate_layout(sub, {pi, pj}).feasible();
  };
  double best = std::numeric_limits<double>::infinity();
  const double min1 = cands[1].front().d, min2 = cands[2].front().d;
  for (const auto& a : cands[0]) {
    if (a.d + min1 + min2 >= best) break;
    for (const auto& b : cands[1]) {
      if (a.d + b.d + min2 >= best) break;
      if (!pair_ok(0, a.pl, 1, b.pl)) continue;
      for (const auto& c3 : cands[2]) {
        if (a.d + b.d + c3.d >= best) break;
        if (pair_ok(0, a.pl, 2, c3.pl) && pair_ok(1, b.pl, 2, c3.pl)) {
          best = a.d + b.d + c3.d;
          break;
        }
      }
    }
  }
  return best;
}

void layout_optimality(Criterion& c) {
  LayoutFile f = load_layout(kData + "/layout/toy3.json");
  double grid = layout_grid_oracle(f.problem, 0.05);
  auto t0 = std::chrono::steady_clock::now();
  Layout l = optimize_layout(f.problem, f.seed, f.config);
  double secs = seconds_since(t0);
  LayoutReport check = evaluate_layout(f.problem, l.placements);
  double rel = (l.report.J - grid) / grid;
  c.detail << "J " << l.report.J << " vs grid " << grid << " (" << 100 * rel << "%), violations "
           << check.ellipsoid.size() + check.overlaps.size() << ", " << secs << " s";
  c.require(std::abs(rel) <= 0.05, "J not within 5% of the grid optimum");
  c.require(check.feasible(), "violations");
  c.require(secs < 30, "runtime");
}

// ----- protocol -----

void protocol_safety(Criterion& c) {
  int transmissions = 0, handshake = 0, overlap = 0, grid_bad = 0;
  for (const char* name : {"base", "dicing_fault", "second_order"}) {
    Session s = run_scenario(name);
    const SimAudit& a = s.engine.sim().audit();
    transmissions += static_cast<int>(a.transmissions.size());
    for (std::size_t k = 1; k < a.transmissions.size(); ++k)
      overlap += a.transmissions[k - 1].end_us > a.transmissions[k].start_us;
    overlap += a.max_in_flight > 1;
    // A write accepted while Update=1 shows up as a transition out of a
    // state the flag was not in.
    std::map<std::string, int> flag;
    for (const auto& t : a.transitions) {
      handshake += flag[t.appliance] != t.from || t.from == t.to;
      flag[t.appliance] = t.to;
    }
  }
  SimConfig cfg;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      GraspAttempt g{16.0 * i / 19.0, 20.0 * j / 19.0};
      grid_bad += attempt_grasp(g, cfg) != (g.translation_mm <= 8.0 && g.rotation_deg <= 10.0);
    }
  c.detail << transmissions << " transmissions audited: " << handshake << " handshake, " << overlap
           << " bus violations; grasp grid " << 400 - grid_bad << "/400 correct";
  c.require(handshake == 0 && overlap == 0 && grid_bad == 0, "violations");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Criterion&)>>> criteria = {
      {"scheduler optimality vs brute force", scheduler_optimality},
      {"parallel efficiency trend", parallel_efficiency},
      {"scenario replays (a)(b)(c)", scenario_replays},
      {"minimum-jerk quintic oracle", min_jerk_oracle},
      {"via-point ordering and norms", via_ordering},
      {"dynamics identities", dynamics_identities},
      {"static torque analysis", static_torque},
      {"OBB lattice oracle", obb_oracle},
      {"layout toy optimality", layout_optimality},
      {"protocol safety", protocol_safety},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Criterion c;
    c.name = name;
    try {
      check(c);
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail << " [exception: " << e.what() << "]";
    }
    failed += !c.pass;
    std::printf("%s  %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
