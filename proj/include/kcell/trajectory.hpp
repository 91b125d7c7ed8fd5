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
// Via-point trajectories minimizing integrated squared jerk plus weighted
// squared acceleration, and the max-jerk (L-infinity) variant.
//
// Each sample k carries (p, v, a, j). Jerk is piecewise linear between
// samples and the lower derivatives are its exact integrals, so the
// sampled states are consistent by construction and the discretization
// converges to the continuous optimum at fourth order.

#ifndef KCELL_TRAJECTORY_HPP_
#define KCELL_TRAJECTORY_HPP_

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kcell/detail/lapack.hpp"
#include "kcell/detail/simplex.hpp"
#include "kcell/domain.hpp"

namespace kcell {

/// Position, velocity and acceleration of one coordinate.
struct BoundaryState {
  double p = 0.0;
  double v = 0.0;
  double a = 0.0;
};

struct ViaPoint {
  // Fraction of the duration, in (0, 1).
  double fraction = 0.5;
  std::vector<double> position;
};

struct TrajectoryProblem {
  double duration_s = 1.0;
  int samples = 64;
  int dims = 1;
  std::vector<BoundaryState> start;
  std::vector<BoundaryState> goal;
  std::vector<ViaPoint> vias;
  double alpha = 0.0;
};

/// Sampled profiles; matrices are samples x dims.
struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd position;
  Eigen::MatrixXd velocity;
  Eigen::MatrixXd acceleration;
  Eigen::MatrixXd jerk;
  // Value of the minimized objective: integrated squared jerk plus alpha
  // times integrated squared acceleration, or the max jerk magnitude.
  double objective = 0.0;
  // Square roots of the integrated squared jerk / acceleration.
  double jerk_l2 = 0.0;
  double acceleration_l2 = 0.0;
  double jerk_linf = 0.0;
  // Max-norm residuals of the optimality and constraint equations.
  double kkt_residual = 0.0;
  double constraint_residual = 0.0;

  double duration() const { return times.empty() ? 0.0 : times.back(); }
};

enum class TrajectoryErrorKind { invalid_problem, inconsistent_constraints, rank_deficient };

class TrajectoryError : public Error {
 public:
  TrajectoryError(TrajectoryErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  TrajectoryErrorKind kind() const { return kind_; }

 private:
  TrajectoryErrorKind kind_;
};

/// Sample index a via point is pinned to.
inline int via_sample(const TrajectoryProblem& p, double fraction) {
  return static_cast<int>(std::lround(fraction * (p.samples - 1)));
}

namespace detail {

inline void validate(const TrajectoryProblem& p) {
  auto fail = [](const std::string& m) {
    throw TrajectoryError(TrajectoryErrorKind::invalid_problem, m);
  };
  if (!(p.duration_s > 0) || !std::isfinite(p.duration_s)) fail("duration must be positive");
  if (p.samples < 8) fail("at least 8 samples required");
  if (p.dims < 1) fail("at least one dimension required");
  if (static_cast<int>(p.start.size()) != p.dims || static_cast<int>(p.goal.size()) != p.dims)
    fail("boundary size does not match dims");
  if (!(p.alpha >= 0) || !std::isfinite(p.alpha)) fail("alpha must be nonnegative");
  double prev = 0.0;
  for (const auto& v : p.vias) {
    if (!(v.fraction > prev) || !(v.fraction < 1.0))
      fail("via fractions must be strictly increasing in (0, 1)");
    if (static_cast<int>(v.position.size()) != p.dims) fail("via position size does not match dims");
    prev = v.fraction;
  }
}

struct Layout {
  int n = 0;
  static int P(int k) { return 4 * k; }
  static int V(int k) { return 4 * k + 1; }
  static int A(int k) { return 4 * k + 2; }
  static int J(int k) { return 4 * k + 3; }
};

// Equality system shared by both objectives: exact integration between
// samples, boundary states and via positions. One rhs column per dim.
struct Constraints {
  Eigen::MatrixXd A;
  Eigen::MatrixXd b;
};

inline Constraints build_constraints(const TrajectoryProblem& p) {
  const int N = p.samples;
  const double h = p.duration_s / (N - 1);
  const int rows = 3 * (N - 1) + 6 + static_cast<int>(p.vias.size());
  Constraints c{Eigen::MatrixXd::Zero(rows, 4 * N), Eigen::MatrixXd::Zero(rows, p.dims)};
  using L = Layout;
  int r = 0;
  for (int k = 0; k + 1 < N; ++k) {
    c.A(r, L::A(k + 1)) = 1;
    c.A(r, L::A(k)) = -1;
    c.A(r, L::J(k)) = -h / 2;
    c.A(r, L::J(k + 1)) = -h / 2;
    ++r;
    c.A(r, L::V(k + 1)) = 1;
    c.A(r, L::V(k)) = -1;
    c.A(r, L::A(k)) = -h;
    c.A(r, L::J(k)) = -h * h / 3;
    c.A(r, L::J(k + 1)) = -h * h / 6;
    ++r;
    c.A(r, L::P(k + 1)) = 1;
    c.A(r, L::P(k)) = -1;
    c.A(r, L::V(k)) = -h;
    c.A(r, L::A(k)) = -h * h / 2;
    c.A(r, L::J(k)) = -h * h * h / 8;
    c.A(r, L::J(k + 1)) = -h * h * h / 24;
    ++r;
  }
  auto pin = [&](int col, auto value) {
    c.A(r, col) = 1;
    for (int d = 0; d < p.dims; ++d) c.b(r, d) = value(d);
    ++r;
  };
  const auto ud = [](int d) { return static_cast<std::size_t>(d); };
  pin(L::P(0), [&](int d) { return p.start[ud(d)].p; });
  pin(L::V(0), [&](int d) { return p.start[ud(d)].v; });
  pin(L::A(0), [&](int d) { return p.start[ud(d)].a; });
  pin(L::P(N - 1), [&](int d) { return p.goal[ud(d)].p; });
  pin(L::V(N - 1), [&](int d) { return p.goal[ud(d)].v; });
  pin(L::A(N - 1), [&](int d) { return p.goal[ud(d)].a; });
  for (const auto& v : p.vias)
    pin(L::P(via_sample(p, v.fraction)), [&](int d) { return v.position[ud(d)]; });
  return c;
}

// Throws when the equality system is inconsistent or has dependent rows.
inline void check_rank(const Constraints& c) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.A);
  qr.setThreshold(1e-10);
  if (qr.rank() == c.A.rows()) return;
  Eigen::MatrixXd augmented(c.A.rows(), c.A.cols() + c.b.cols());
  augmented << c.A, c.b;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qra(augmented);
  qra.setThreshold(1e-10);
  if (qra.rank() > qr.rank())
    throw TrajectoryError(TrajectoryErrorKind::inconsistent_constraints,
                          "inconsistent boundary or via constraints");
  throw TrajectoryError(TrajectoryErrorKind::rank_deficient,
                        "redundant boundary or via constraints");
}

// Quadratic forms of the integrated squared jerk and acceleration.
// Jerk is linear per segment (two-point Gram matrix); acceleration is
// quadratic per segment and integrated by three-point Gauss-Legendre.
inline Eigen::MatrixXd jerk_form(int N, double h) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4 * N, 4 * N);
  using L = Layout;
  for (int k = 0; k + 1 < N; ++k) {
    int a = L::J(k), b = L::J(k + 1);
    H(a, a) += h / 3;
    H(b, b) += h / 3;
    H(a, b) += h / 6;
    H(b, a) += h / 6;
  }
  return H;
}

inline Eigen::MatrixXd acceleration_form(int N, double h) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4 * N, 4 * N);
  using L = Layout;
  const double g = std::sqrt(0.6);
  const std::array<double, 3> nodes{0.5 * h * (1 - g), 0.5 * h, 0.5 * h * (1 + g)};
  const std::array<double, 3> weights{h * 5.0 / 18.0, h * 8.0 / 18.0, h * 5.0 / 18.0};
  for (int k = 0; k + 1 < N; ++k) {
    const std::array<int, 3> idx{L::A(k), L::J(k), L::J(k + 1)};
    for (std::size_t q = 0; q < 3; ++q) {
      double s = nodes[q];
      const std::array<double, 3> w{1.0, s - s * s / (2 * h), s * s / (2 * h)};
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 3; ++y) H(idx[x], idx[y]) += weights[q] * w[x] * w[y];
    }
  }
  return H;
}

inline Trajectory unpack(const TrajectoryProblem& p, const Eigen::MatrixXd& z) {
  const int N = p.samples;
  const double h = p.duration_s / (N - 1);
  Trajectory t;
  t.times.resize(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) t.times[static_cast<std::size_t>(k)] = k == N - 1 ? p.duration_s : k * h;
  t.position.resize(N, p.dims);
  t.velocity.resize(N, p.dims);
  t.acceleration.resize(N, p.dims);
  t.jerk.resize(N, p.dims);
  for (int k = 0; k < N; ++k)
    for (int d = 0; d < p.dims; ++d) {
      t.position(k, d) = z(Layout::P(k), d);
      t.velocity(k, d) = z(Layout::V(k), d);
      t.acceleration(k, d) = z(Layout::A(k), d);
      t.jerk(k, d) = z(Layout::J(k), d);
    }
  Eigen::MatrixXd Hj = jerk_form(N, h);
  Eigen::MatrixXd Ha = acceleration_form(N, h);
  double jj = 0, aa = 0;
  for (int d = 0; d < p.dims; ++d) {
    jj += z.col(d).dot(Hj * z.col(d));
    aa += z.col(d).dot(Ha * z.col(d));
  }
  t.jerk_l2 = std::sqrt(std::max(jj, 0.0));
  t.acceleration_l2 = std::sqrt(std::max(aa, 0.0));
  t.jerk_linf = t.jerk.cwiseAbs().maxCoeff();
  return t;
}

}  // namespace detail

/// Minimizes the integrated squared jerk plus alpha times the integrated
/// squared acceleration subject to the boundary states and via
/// positions, by one symmetric indefinite factorization of the KKT
/// system shared across dimensions.
inline Trajectory solve_min_jerk(const TrajectoryProblem& p) {
  detail::validate(p);
  const int N = p.samples;
  const double h = p.duration_s / (N - 1);
  detail::Constraints c = detail::build_constraints(p);
  detail::check_rank(c);

  const Eigen::Index n = 4 * N;
  const Eigen::Index m = c.A.rows();
  Eigen::MatrixXd H = detail::jerk_form(N, h) + p.alpha * detail::acceleration_form(N, h);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = 2 * H;
  K.topRightCorner(n, m) = c.A.transpose();
  K.bottomLeftCorner(m, n) = c.A;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + m, p.dims);
  rhs.bottomRows(m) = c.b;
  auto sol = detail::solve_symmetric(K, rhs);
  if (!sol)
    throw TrajectoryError(TrajectoryErrorKind::rank_deficient, "singular KKT system");

  Eigen::MatrixXd z = sol->topRows(n);
  Eigen::MatrixXd lambda = sol->bottomRows(m);
  Trajectory t = detail::unpack(p, z);
  t.kkt_residual = (2 * H * z + c.A.transpose() * lambda).cwiseAbs().maxCoeff();
  t.constraint_residual = (c.A * z - c.b).cwiseAbs().maxCoeff();
  t.objective = t.jerk_l2 * t.jerk_l2 + p.alpha * t.acceleration_l2 * t.acceleration_l2;
  return t;
}

/// Minimizes the largest jerk sample magnitude per dimension subject to
/// the same equality constraints, as a linear program over the jerk
/// samples. Alpha is ignored.
inline Trajectory solve_min_jerk_linf(const TrajectoryProblem& p) {
  detail::validate(p);
  const int N = p.samples;
  const double h = p.duration_s / (N - 1);
  detail::Constraints c = detail::build_constraints(p);
  detail::check_rank(c);

  // State (p, v, a) at sample k as offset(k) + gain(k) * jerk.
  Eigen::Matrix3d Phi;
  Phi << 1, h, h * h / 2, 0, 1, h, 0, 0, 1;
  const Eigen::Vector3d G0(h * h * h / 8, h * h / 3, h / 2);
  const Eigen::Vector3d G1(h * h * h / 24, h * h / 6, h / 2);

  std::vector<int> via_rows;
  for (const auto& v : p.vias) via_rows.push_back(via_sample(p, v.fraction));
  const int rows = 3 + static_cast<int>(via_rows.size());

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4 * N, p.dims);
  for (int d = 0; d < p.dims; ++d) {
    const auto& s0 = p.start[static_cast<std::size_t>(d)];
    const auto& sg = p.goal[static_cast<std::size_t>(d)];
    std::vector<Eigen::Vector3d> offset(static_cast<std::size_t>(N));
    std::vector<Eigen::MatrixXd> gain(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(3, N));
    offset[0] = Eigen::Vector3d(s0.p, s0.v, s0.a);
    for (std::size_t k = 1; k < static_cast<std::size_t>(N); ++k) {
      offset[k] = Phi * offset[k - 1];
      gain[k] = Phi * gain[k - 1];
      gain[k].col(static_cast<Eigen::Index>(k) - 1) += G0;
      gain[k].col(static_cast<Eigen::Index>(k)) += G1;
    }
    Eigen::MatrixXd E(rows, N);
    Eigen::VectorXd target(rows);
    E.topRows(3) = gain.back();
    target.head(3) = Eigen::Vector3d(sg.p, sg.v, sg.a) - offset.back();
    for (std::size_t v = 0; v < via_rows.size(); ++v) {
      auto k = static_cast<std::size_t>(via_rows[v]);
      E.row(3 + static_cast<Eigen::Index>(v)) = gain[k].row(0);
      target(3 + static_cast<Eigen::Index>(v)) =
          p.vias[v].position[static_cast<std::size_t>(d)] - offset[k](0);
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      double s = E.row(r).cwiseAbs().maxCoeff();
      if (s > 0) {
        E.row(r) /= s;
        target(r) /= s;
      }
    }

    // min s with E j = target and |j_k| <= s, rewritten with j = w / lambda
    // as max lambda with E w = lambda target and |w_k| <= 1.
    Eigen::VectorXd j = Eigen::VectorXd::Zero(N);
    if (target.cwiseAbs().maxCoeff() > 1e-14) {
      Eigen::MatrixXd A(rows, N + 1);
      A.leftCols(N) = E;
      A.col(N) = -target;
      Eigen::VectorXd cost = Eigen::VectorXd::Zero(N + 1), lower(N + 1), upper(N + 1);
      cost(N) = -1.0;
      lower.setConstant(-1.0);
      upper.setConstant(1.0);
      lower(N) = 0.0;
      upper(N) = std::numeric_limits<double>::infinity();
      detail::LpResult lp = detail::solve_lp(A, Eigen::VectorXd::Zero(rows), cost, lower, upper);
      if (lp.status != detail::LpStatus::optimal || !(lp.x(N) > 0))
        throw TrajectoryError(TrajectoryErrorKind::inconsistent_constraints, "max-jerk program has no solution");
      j = lp.x.head(N) / lp.x(N);
    }
    for (int k = 0; k < N; ++k) {
      Eigen::Vector3d st = offset[static_cast<std::size_t>(k)] + gain[static_cast<std::size_t>(k)] * j;
      z(detail::Layout::P(k), d) = st(0);
      z(detail::Layout::V(k), d) = st(1);
      z(detail::Layout::A(k), d) = st(2);
      z(detail::Layout::J(k), d) = j(k);
    }
  }
  Trajectory t = detail::unpack(p, z);
  t.constraint_residual = (c.A * z - c.b).cwiseAbs().maxCoeff();
  t.objective = t.jerk_linf;
  return t;
}

struct TrajectorySample {
  Eigen::VectorXd position;
  Eigen::VectorXd velocity;
  Eigen::VectorXd acceleration;
};

/// Linear interpolation between samples; exact at sample times.
inline TrajectorySample evaluate(const Trajectory& t, double time_s) {
  if (t.times.empty()) throw Error("empty trajectory");
  const double T = t.duration();
  if (!(time_s >= 0.0) || time_s > T) throw Error("time outside trajectory");
  const int N = static_cast<int>(t.times.size());
  int k = static_cast<int>(std::upper_bound(t.times.begin(), t.times.end(), time_s) - t.times.begin()) - 1;
  k = std::clamp(k, 0, N - 2);
  const double t0 = t.times[static_cast<std::size_t>(k)];
  const double t1 = t.times[static_cast<std::size_t>(k) + 1];
  const double w = (time_s - t0) / (t1 - t0);
  auto lerp = [&](const Eigen::MatrixXd& m) -> Eigen::VectorXd {
    return ((1 - w) * m.row(k) + w * m.row(k + 1)).transpose();
  };
  return {lerp(t.position), lerp(t.velocity), lerp(t.acceleration)};
}

}  // namespace kcell

#endif  // KCELL_TRAJECTORY_HPP_
