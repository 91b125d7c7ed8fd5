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

#include "kcell/layout.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace kcell {
namespace {

constexpr double kPi = 3.14159265358979323846;

Obb cube(Eigen::Vector3d c, double half = 0.5) {
  Obb o;
  o.center = c;
  o.half_extents = Eigen::Vector3d::Constant(half);
  return o;
}

Obb random_obb(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-1.0, 1.0), ext(0.1, 0.8);
  Obb o;
  o.center = Eigen::Vector3d(pos(rng), pos(rng), pos(rng));
  o.half_extents = Eigen::Vector3d(ext(rng), ext(rng), ext(rng));
  Eigen::Vector4d q(pos(rng), pos(rng), pos(rng), pos(rng));
  o.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
  return o;
}

Obb inflated(Obb o, double by) {
  o.half_extents.array() += by;
  return o;
}

// Lattice points of `a` (20 per axis, surfaces included) inside `b`.
bool lattice_hits(const Obb& a, const Obb& b) {
  const int n = 20;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Eigen::Vector3d s(-1 + 2.0 * i / (n - 1), -1 + 2.0 * j / (n - 1), -1 + 2.0 * k / (n - 1));
        Eigen::Vector3d p = a.center + a.rotation * a.half_extents.cwiseProduct(s);
        if (b.contains(p)) return true;
      }
  return false;
}

double spacing(const Obb& o) { return 2.0 * o.half_extents.maxCoeff() / 19.0; }

TEST(Obb, CoincidentUnitCubes) {
  EXPECT_DOUBLE_EQ(obb_overlap(cube({0, 0, 0}), cube({0, 0, 0})), 1.0);
}

TEST(Obb, DistantCubes) {
  EXPECT_EQ(obb_overlap(cube({0, 0, 0}), cube({10, 0, 0})), 0.0);
}

TEST(Obb, TouchingFacesDoNotOverlap) {
  EXPECT_EQ(obb_overlap(cube({0, 0, 0}), cube({1, 0, 0})), 0.0);
  EXPECT_NEAR(obb_overlap(cube({0, 0, 0}), cube({0.9, 0, 0})), 0.1, 1e-12);
}

TEST(Obb, AgreesWithLatticeOracle) {
  std::mt19937_64 rng(12);
  int decided = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Obb a = random_obb(rng), b = random_obb(rng);
    double depth = obb_overlap(a, b);
    // Overlap is certain when a lattice point of one lies inside the
    // other; it is excluded when none lies inside the other grown by
    // the lattice spacing.
    bool certain = lattice_hits(a, b) || lattice_hits(b, a);
    bool excluded = !lattice_hits(a, inflated(b, 0.5 * std::sqrt(3.0) * spacing(a))) ||
                    !lattice_hits(b, inflated(a, 0.5 * std::sqrt(3.0) * spacing(b)));
    if (certain) {
      EXPECT_GT(depth, 0.0) << trial;
      ++decided;
    } else if (excluded) {
      EXPECT_EQ(depth, 0.0) << trial;
      ++decided;
    }
  }
  EXPECT_GT(decided, 900);
}

TEST(Obb, SymmetricAndRigidInvariant) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    Obb a = random_obb(rng), b = random_obb(rng);
    double d = obb_overlap(a, b);
    EXPECT_NEAR(d, obb_overlap(b, a), 1e-12);
    Obb r = random_obb(rng);
    Eigen::Matrix3d R = r.rotation;
    Eigen::Vector3d t = r.center * 5;
    Obb a2 = a, b2 = b;
    a2.center = R * a.center + t;
    a2.rotation = R * a.rotation;
    b2.center = R * b.center + t;
    b2.rotation = R * b.rotation;
    EXPECT_NEAR(obb_overlap(a2, b2), d, 1e-9);
  }
}

// Workspace sphere of radius 1.2 around (0, 0, 1), appliances 0.5 m
// cubes on a shelf with the key point on the front top edge.
LayoutProblem toy(int count) {
  LayoutProblem p;
  p.v = Eigen::Vector3d(0, 0, 1);
  p.A = Eigen::Matrix3d::Identity() / (1.2 * 1.2);
  p.corridor_half = Eigen::Vector2d(0.1, 0.1);
  p.region_min = Eigen::Vector2d(-1.5, -1.5);
  p.region_max = Eigen::Vector2d(1.5, 1.5);
  for (int i = 0; i < count; ++i) {
    ApplianceSpec a;
    a.name = "appliance" + std::to_string(i);
    a.half_extents = Eigen::Vector3d::Constant(0.25);
    a.z = 0.75;
    a.key_offset = Eigen::Vector3d(0.25, 0, 0.25);
    p.appliances.push_back(a);
  }
  return p;
}

TEST(Evaluate, KeyPointAtCenter) {
  LayoutProblem p = toy(1);
  p.appliances[0].key_offset = Eigen::Vector3d(0, 0, 0.25);
  LayoutReport r = evaluate_layout(p, {{0, 0, 0}});
  EXPECT_EQ(r.J, 0.0);
  EXPECT_TRUE(r.feasible());
}

TEST(Evaluate, KeyPointOutsideEllipsoid) {
  LayoutProblem p = toy(1);
  LayoutReport r = evaluate_layout(p, {{1.45, 0, 0}});
  ASSERT_EQ(r.ellipsoid.size(), 1u);
  EXPECT_NEAR(r.ellipsoid[0].excess, 1.7 * 1.7 / 1.44 - 1, 1e-12);
}

TEST(Evaluate, HandPlacedToy) {
  LayoutProblem p = toy(3);
  std::vector<Placement> l;
  for (int i = 0; i < 3; ++i) {
    double th = 2 * kPi * i / 3;
    l.push_back({0.6 * std::cos(th), 0.6 * std::sin(th), th + kPi});
  }
  LayoutReport r = evaluate_layout(p, l);
  EXPECT_TRUE(r.feasible());
  EXPECT_NEAR(r.J, 3 * 0.35, 1e-12);
}

TEST(Evaluate, ForeignCorridorCountsOwnDoesNot) {
  LayoutProblem p = toy(2);
  // Body 1 sits in the path from key point 0 to the center.
  std::vector<Placement> l{{0.9, 0, kPi}, {0.3, 0, 0}};
  LayoutReport r = evaluate_layout(p, l);
  bool hit = false;
  for (const auto& o : r.overlaps) {
    EXPECT_FALSE(o.corridor && o.body == o.other);
    if (o.corridor && o.body == 1 && o.other == 0) hit = true;
  }
  EXPECT_TRUE(hit);
  EXPECT_THROW(evaluate_layout(p, {{0, 0, 0}}), Error);
}

TEST(Optimize, SingleApplianceReachesCenter) {
  LayoutProblem p = toy(1);
  p.appliances[0].key_offset = Eigen::Vector3d(0, 0, 0.25);
  Layout l = optimize_layout(p, 1);
  EXPECT_LE(l.report.J, 1e-3);
  EXPECT_TRUE(l.report.feasible());
}

// Two appliances with keys 0.2 m below the center: at the joint optimum
// each body would block the other's corridor.
LayoutProblem blocked_pair() {
  LayoutProblem p = toy(2);
  for (auto& a : p.appliances) {
    a.z = 0.6;
    a.key_offset = Eigen::Vector3d(0.25, 0, 0.2);
  }
  p.corridor_half = Eigen::Vector2d(0.15, 0.15);
  return p;
}

double grid_oracle(const LayoutProblem& p, double step) {
  struct Cand {
    Placement pl;
    double d;
  };
  std::vector<Cand> cands;
  const int n = static_cast<int>(std::lround(1.2 / step));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = 0; k < 4; ++k) {
        Placement pl{i * step, j * step, k * kPi / 2};
        Eigen::Vector3d e = key_point(p.appliances[0], pl) - p.v;
        if (e.dot(p.A * e) > 1) continue;
        cands.push_back({pl, e.norm()});
      }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < cands.size() && 2 * cands[a].d < best; ++a)
    for (std::size_t b = 0; b < cands.size() && cands[a].d + cands[b].d < best; ++b)
      if (evaluate_layout(p, {cands[a].pl, cands[b].pl}).feasible())
        best = cands[a].d + cands[b].d;
  return best;
}

TEST(Optimize, CloseToGridOracle) {
  LayoutProblem p = blocked_pair();
  double oracle = grid_oracle(p, 0.05);
  Layout l = optimize_layout(p, 7);
  ASSERT_TRUE(l.report.feasible());
  EXPECT_LE(l.report.J, 1.05 * oracle);
  // The joint unconstrained optimum (both keys under the center) is infeasible.
  EXPECT_GT(l.report.J, 0.4 + 1e-3);
  std::cout << "layout J " << l.report.J << " grid " << oracle << "\n";
}

TEST(Optimize, FeasibleMonotoneAndDeterministic) {
  LayoutProblem p = toy(3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Layout l = optimize_layout(p, seed);
    EXPECT_TRUE(evaluate_layout(p, l.placements).feasible());
    for (std::size_t k = 1; k < l.incumbent_history.size(); ++k)
      EXPECT_LE(l.incumbent_history[k], l.incumbent_history[k - 1]);
    EXPECT_EQ(optimize_layout(p, seed).placements, l.placements);
  }
}

TEST(Optimize, TinyWorkspaceIsInfeasible) {
  LayoutProblem p = toy(2);
  p.A = Eigen::Matrix3d::Identity() / (0.05 * 0.05);
  for (auto& a : p.appliances) a.key_offset = Eigen::Vector3d(0, 0, 0.25);
  LayoutConfig c;
  c.iterations = 3000;
  try {
    optimize_layout(p, 3, c);
    FAIL();
  } catch (const NoFeasibleFound& e) {
    EXPECT_FALSE(e.best().report.feasible());
    EXPECT_EQ(e.best().placements.size(), 2u);
  }
}

}  // namespace
}  // namespace kcell
