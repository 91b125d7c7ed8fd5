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
// Appliance placement around the manipulator: key points pulled toward
// the workspace center, inside the workspace ellipsoid, with no body
// overlapping another body or another appliance's arm corridor.

#ifndef KCELL_LAYOUT_HPP_
#define KCELL_LAYOUT_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kcell/domain.hpp"

namespace kcell {

enum class ObbRole { appliance_body, arm_corridor };

struct Obb {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.5);
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  ObbRole role = ObbRole::appliance_body;

  bool contains(const Eigen::Vector3d& p) const {
    Eigen::Vector3d local = rotation.transpose() * (p - center);
    return (local.cwiseAbs().array() <= half_extents.array()).all();
  }
};

/// Separating-axis test over the 15 candidate axes. Returns 0 when some
/// axis separates the boxes (touching counts as separated), otherwise
/// the smallest overlap of the projections.
inline double obb_overlap(const Obb& a, const Obb& b) {
  const Eigen::Vector3d d = b.center - a.center;
  double depth = std::numeric_limits<double>::infinity();
  auto test = [&](Eigen::Vector3d axis) {
    double n = axis.norm();
    if (n < 1e-9) return true;  // parallel edges: covered by face axes
    axis /= n;
    double ra = 0, rb = 0;
    for (int i = 0; i < 3; ++i) {
      ra += a.half_extents(i) * std::abs(a.rotation.col(i).dot(axis));
      rb += b.half_extents(i) * std::abs(b.rotation.col(i).dot(axis));
    }
    double overlap = ra + rb - std::abs(d.dot(axis));
    if (overlap <= 0) return false;
    depth = std::min(depth, overlap);
    return true;
  };
  for (int i = 0; i < 3; ++i)
    if (!test(a.rotation.col(i)) || !test(b.rotation.col(i))) return 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!test(a.rotation.col(i).cross(b.rotation.col(j)))) return 0.0;
  return depth;
}

struct ApplianceSpec {
  std::string name;
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.25);
  // Height of the body center (appliances stand on fixed floors/shelves).
  double z = 0.0;
  // End-effector target in the appliance frame.
  Eigen::Vector3d key_offset = Eigen::Vector3d::Zero();
  // When set, the yaw is not optimized.
  std::optional<double> fixed_yaw;
};

struct LayoutProblem {
  std::vector<ApplianceSpec> appliances;
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
  // Half-extents of the corridor cross-section (width, height).
  Eigen::Vector2d corridor_half{0.1, 0.1};
  // Search region for body centers: (x_min, y_min) to (x_max, y_max).
  Eigen::Vector2d region_min{-2.0, -2.0};
  Eigen::Vector2d region_max{2.0, 2.0};

  void validate() const {
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 || A.llt().info() != Eigen::Success)
      throw Error("workspace matrix must be symmetric positive definite");
    for (const auto& a : appliances)
      if ((a.half_extents.array() <= 0).any()) throw Error("appliance " + a.name + " needs positive extents");
    if ((corridor_half.array() <= 0).any()) throw Error("corridor cross-section must be positive");
    if ((region_max.array() < region_min.array()).any()) throw Error("empty search region");
  }
};

struct Placement {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  bool operator==(const Placement&) const = default;
};

struct EllipsoidViolation {
  int appliance = 0;
  double excess = 0.0;  // (x - v)' A (x - v) - 1
};

struct OverlapViolation {
  int body = 0;
  int other = 0;           // body index or corridor owner
  bool corridor = false;   // other names a corridor
  double depth = 0.0;
};

struct LayoutReport {
  double J = 0.0;
  std::vector<EllipsoidViolation> ellipsoid;
  std::vector<OverlapViolation> overlaps;

  bool feasible() const { return ellipsoid.empty() && overlaps.empty(); }
  double violation(double overlap_weight, double ellipsoid_weight) const {
    double s = 0;
    for (const auto& e : ellipsoid) s += ellipsoid_weight * e.excess;
    for (const auto& o : overlaps) s += overlap_weight * o.depth;
    return s;
  }
};

inline Eigen::Matrix3d yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

inline Obb body_obb(const ApplianceSpec& a, const Placement& p) {
  return {Eigen::Vector3d(p.x, p.y, a.z), a.half_extents, yaw_rotation(p.yaw), ObbRole::appliance_body};
}

inline Eigen::Vector3d key_point(const ApplianceSpec& a, const Placement& p) {
  return Eigen::Vector3d(p.x, p.y, a.z) + yaw_rotation(p.yaw) * a.key_offset;
}

/// Arm corridor from the key point to the workspace center, or nothing
/// when they coincide.
inline std::optional<Obb> corridor_obb(const LayoutProblem& prob, const ApplianceSpec& a,
                                       const Placement& p) {
  Eigen::Vector3d k = key_point(a, p);
  Eigen::Vector3d axis = prob.v - k;
  double len = axis.norm();
  if (len < 1e-9) return std::nullopt;
  axis /= len;
  // Width axis horizontal where possible.
  Eigen::Vector3d side = Eigen::Vector3d::UnitZ().cross(axis);
  if (side.norm() < 1e-9) side = Eigen::Vector3d::UnitX().cross(axis);
  side.normalize();
  Eigen::Vector3d up = axis.cross(side);
  Obb b;
  b.center = 0.5 * (k + prob.v);
  b.half_extents = Eigen::Vector3d(0.5 * len, prob.corridor_half(0), prob.corridor_half(1));
  b.rotation.col(0) = axis;
  b.rotation.col(1) = side;
  b.rotation.col(2) = up;
  b.role = ObbRole::arm_corridor;
  return b;
}

/// Objective plus every violated constraint. A body's own corridor is
/// exempt from the body-corridor constraint.
inline LayoutReport evaluate_layout(const LayoutProblem& prob, const std::vector<Placement>& layout) {
  if (layout.size() != prob.appliances.size()) throw Error("placement count does not match appliances");
  LayoutReport r;
  const int n = static_cast<int>(layout.size());
  std::vector<Obb> bodies;
  std::vector<std::optional<Obb>> corridors;
  for (int i = 0; i < n; ++i) {
    const auto& a = prob.appliances[static_cast<std::size_t>(i)];
    const auto& p = layout[static_cast<std::size_t>(i)];
    Eigen::Vector3d e = key_point(a, p) - prob.v;
    r.J += e.norm();
    double excess = e.dot(prob.A * e) - 1.0;
    if (excess > 0) r.ellipsoid.push_back({i, excess});
    bodies.push_back(body_obb(a, p));
    corridors.push_back(corridor_obb(prob, a, p));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      if (i < j) {
        double d = obb_overlap(bodies[ui], bodies[uj]);
        if (d > 0) r.overlaps.push_back({i, j, false, d});
      }
      if (corridors[uj]) {
        double d = obb_overlap(bodies[ui], *corridors[uj]);
        if (d > 0) r.overlaps.push_back({i, j, true, d});
      }
    }
  return r;
}

struct LayoutConfig {
  int iterations = 20000;
  double initial_temperature = 1.0;
  double final_temperature = 1e-4;
  double overlap_weight = 1e3;
  double ellipsoid_weight = 1e3;
  // Initial translation step (m) and yaw step (rad).
  double step_m = 0.3;
  double step_yaw = 0.5;
  // Pattern-search polish stops below this step.
  double polish_tolerance = 1e-5;
  // Independent annealing chains; the best feasible result wins.
  int restarts = 8;
};

struct Layout {
  std::vector<Placement> placements;
  LayoutReport report;
  // J of each new feasible incumbent, in acceptance order.
  std::vector<double> incumbent_history;
};

class NoFeasibleFound : public Error {
 public:
  NoFeasibleFound(Layout best, const std::string& summary)
      : Error("no feasible layout found: " + summary), best_(std::move(best)) {}
  const Layout& best() const { return best_; }

 private:
  Layout best_;
};

namespace detail {

class LayoutSearch {
 public:
  LayoutSearch(const LayoutProblem& p, std::uint64_t seed, const LayoutConfig& c)
      : prob_(p), cfg_(c), rng_(seed) {}

  Layout run() {
    const std::size_t n = prob_.appliances.size();
    std::vector<Placement> cur(n);
    for (std::size_t i = 0; i < n; ++i) {
      cur[i].x = uniform(prob_.region_min.x(), prob_.region_max.x());
      cur[i].y = uniform(prob_.region_min.y(), prob_.region_max.y());
      cur[i].yaw = prob_.appliances[i].fixed_yaw.value_or(uniform(-kPi, kPi));
    }
    LayoutReport cur_r = evaluate_layout(prob_, cur);
    double cur_f = penalized(cur_r);
    std::vector<Placement> best = cur;
    double best_f = cur_f;
    Layout out;
    consider(out, cur, cur_r);

    const double ratio = cfg_.final_temperature / cfg_.initial_temperature;
    for (int it = 0; it < cfg_.iterations && n > 0; ++it) {
      double frac = static_cast<double>(it) / std::max(1, cfg_.iterations - 1);
      double T = cfg_.initial_temperature * std::pow(ratio, frac);
      double scale = std::max(0.02, 1.0 - frac);
      std::vector<Placement> cand = cur;
      perturb(cand, scale);
      LayoutReport r = evaluate_layout(prob_, cand);
      double f = penalized(r);
      if (f <= cur_f || uniform(0.0, 1.0) < std::exp((cur_f - f) / T)) {
        cur = std::move(cand);
        cur_f = f;
        consider(out, cur, r);
        if (f < best_f) {
          best_f = f;
          best = cur;
        }
      }
    }

    std::vector<Placement> start = out.placements.empty() ? best : out.placements;
    if (out.placements.empty()) {
      repair(start);
      LayoutReport r = evaluate_layout(prob_, start);
      if (!r.feasible()) {
        Layout failed{start, r, out.incumbent_history};
        throw NoFeasibleFound(failed, summary(r));
      }
      consider(out, start, r);
    }
    polish(out);
    out.report = evaluate_layout(prob_, out.placements);
    return out;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  double penalized(const LayoutReport& r) const {
    return r.J + r.violation(cfg_.overlap_weight, cfg_.ellipsoid_weight);
  }

  void clamp(Placement& p) const {
    p.x = std::clamp(p.x, prob_.region_min.x(), prob_.region_max.x());
    p.y = std::clamp(p.y, prob_.region_min.y(), prob_.region_max.y());
  }

  void perturb(std::vector<Placement>& l, double scale) {
    auto i = static_cast<std::size_t>(
        std::uniform_int_distribution<std::size_t>(0, l.size() - 1)(rng_));
    l[i].x += cfg_.step_m * scale * normal();
    l[i].y += cfg_.step_m * scale * normal();
    if (!prob_.appliances[i].fixed_yaw) l[i].yaw = std::remainder(l[i].yaw + cfg_.step_yaw * scale * normal(), 2 * kPi);
    clamp(l[i]);
  }

  // Records a new feasible incumbent when it improves J.
  void consider(Layout& out, const std::vector<Placement>& l, const LayoutReport& r) const {
    if (!r.feasible()) return;
    if (!out.placements.empty() && !(r.J < out.report.J)) return;
    out.placements = l;
    out.report = r;
    out.incumbent_history.push_back(r.J);
  }

  // Coordinate moves on one free variable at a time, halving the step.
  template <typename Score>
  void pattern_search(std::vector<Placement>& l, Score score, double step) {
    double best = score(l);
    while (step >= cfg_.polish_tolerance) {
      bool improved = false;
      for (std::size_t i = 0; i < l.size(); ++i)
        for (int var = 0; var < 3; ++var) {
          if (var == 2 && prob_.appliances[i].fixed_yaw) continue;
          for (double sign : {1.0, -1.0}) {
            std::vector<Placement> cand = l;
            double& field = var == 0 ? cand[i].x : var == 1 ? cand[i].y : cand[i].yaw;
            field += sign * step * (var == 2 ? cfg_.step_yaw / cfg_.step_m : 1.0);
            clamp(cand[i]);
            double s = score(cand);
            if (s < best) {
              best = s;
              l = std::move(cand);
              improved = true;
            }
          }
        }
      if (!improved) step *= 0.5;
    }
  }

  void repair(std::vector<Placement>& l) {
    pattern_search(
        l,
        [&](const std::vector<Placement>& c) {
          LayoutReport r = evaluate_layout(prob_, c);
          return r.violation(1.0, 1.0);
        },
        cfg_.step_m);
  }

  void polish(Layout& out) {
    std::vector<Placement> l = out.placements;
    pattern_search(
        l,
        [&](const std::vector<Placement>& c) {
          LayoutReport r = evaluate_layout(prob_, c);
          return r.feasible() ? r.J : std::numeric_limits<double>::infinity();
        },
        cfg_.step_m);
    consider(out, l, evaluate_layout(prob_, l));
  }

  static std::string summary(const LayoutReport& r) {
    return std::to_string(r.ellipsoid.size()) + " ellipsoid and " + std::to_string(r.overlaps.size()) +
           " overlap violations";
  }

  const LayoutProblem& prob_;
  LayoutConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace detail

/// Simulated annealing on the penalized objective, feasibility repair
/// when no feasible state was visited, then a pattern-search polish that
/// keeps feasibility. Deterministic per seed.
inline Layout optimize_layout(const LayoutProblem& problem, std::uint64_t seed,
                              const LayoutConfig& config = {}) {
  problem.validate();
  if (config.iterations < 0) throw Error("negative iteration budget");
  if (config.restarts < 1) throw Error("need at least one annealing chain");
  std::mt19937_64 seeder(seed);
  std::optional<Layout> best;
  std::vector<double> history;
  std::optional<NoFeasibleFound> failure;
  for (int k = 0; k < config.restarts; ++k) {
    try {
      Layout l = detail::LayoutSearch(problem, seeder(), config).run();
      for (double j : l.incumbent_history)
        if (history.empty() || j < history.back()) history.push_back(j);
      if (!best || l.report.J < best->report.J) best = std::move(l);
    } catch (const NoFeasibleFound& e) {
      const double w = config.overlap_weight, v = config.ellipsoid_weight;
      if (!failure || e.best().report.violation(w, v) < failure->best().report.violation(w, v)) failure = e;
    }
  }
  if (!best) throw *failure;
  best->incumbent_history = std::move(history);
  return *best;
}

}  // namespace kcell

#endif  // KCELL_LAYOUT_HPP_
