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

// Bounded-variable revised simplex. Meant for the small linear programs of
// the trajectory module (a handful of rows, a few hundred columns), where
// the basis is refactored from scratch at every pivot.

#ifndef KCELL_DETAIL_SIMPLEX_HPP_
#define KCELL_DETAIL_SIMPLEX_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace kcell::detail {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// min c'x  s.t.  A x = b,  lower <= x <= upper (lower finite).
class BoundedSimplex {
 public:
  BoundedSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, double eps = 1e-10)
      : m_(A.rows()), n_(A.cols()), eps_(eps) {
    // Structural columns, then one artificial per row signed so that it
    // starts nonnegative with every structural at its lower bound.
    A_ = Eigen::MatrixXd::Zero(m_, n_ + m_);
    A_.leftCols(n_) = A;
    lo_ = Eigen::VectorXd::Zero(n_ + m_);
    hi_ = Eigen::VectorXd::Constant(n_ + m_, kInf);
    lo_.head(n_) = lower;
    hi_.head(n_) = upper;
    c_ = c;
    b_ = b;
    x_ = lo_;
    Eigen::VectorXd r = b - A * lower;
    for (Eigen::Index i = 0; i < m_; ++i) {
      A_(i, n_ + i) = r(i) < 0 ? -1.0 : 1.0;
      x_(n_ + i) = std::abs(r(i));
      basis_.push_back(n_ + i);
    }
    in_basis_.assign(static_cast<std::size_t>(n_ + m_), -1);
    for (Eigen::Index i = 0; i < m_; ++i) in_basis_[static_cast<std::size_t>(n_ + i)] = static_cast<int>(i);
  }

  LpResult run(int max_iterations = 100000) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
    phase1.tail(m_).setOnes();
    LpStatus s = iterate(phase1, max_iterations);
    if (s != LpStatus::optimal) return {s, {}, 0.0};
    double scale = std::max(1.0, b_.cwiseAbs().maxCoeff());
    if (x_.tail(m_).sum() > 1e-9 * scale) return {LpStatus::infeasible, {}, 0.0};
    // Artificials may stay basic at zero but can no longer move.
    for (Eigen::Index i = 0; i < m_; ++i) hi_(n_ + i) = 0.0;

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
    phase2.head(n_) = c_;
    s = iterate(phase2, max_iterations);
    if (s != LpStatus::optimal) return {s, {}, 0.0};
    return {LpStatus::optimal, x_.head(n_), c_.dot(x_.head(n_))};
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd B(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[static_cast<std::size_t>(i)]);
    return B;
  }

  // Recomputes basic values from the nonbasic ones, limiting drift.
  void refresh(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
    Eigen::VectorXd r = b_;
    for (Eigen::Index j = 0; j < n_ + m_; ++j)
      if (in_basis_[static_cast<std::size_t>(j)] < 0 && x_(j) != 0.0) r -= A_.col(j) * x_(j);
    Eigen::VectorXd xb = lu.solve(r);
    for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
  }

  LpStatus iterate(const Eigen::VectorXd& cost, int max_iterations) {
    int degenerate = 0;
    for (int it = 0; it < max_iterations; ++it) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix());
      refresh(lu);
      Eigen::VectorXd cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
      Eigen::VectorXd y = lu.transpose().solve(cb);

      // Pricing: Dantzig, or Bland's first eligible index once pivots
      // stop making progress (guards against cycling).
      const bool bland = degenerate > 50;
      Eigen::Index enter = -1;
      double best = 0.0, dir = 0.0;
      for (Eigen::Index j = 0; j < n_ + m_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)] >= 0 || lo_(j) == hi_(j)) continue;
        double d = cost(j) - A_.col(j).dot(y);
        double cn = 1.0 + A_.col(j).cwiseAbs().maxCoeff();
        bool up = x_(j) <= lo_(j) && d < -eps_ * cn;
        bool down = x_(j) >= hi_(j) && d > eps_ * cn;
        if (!up && !down) continue;
        if (bland) {
          enter = j;
          dir = up ? 1.0 : -1.0;
          break;
        }
        if (std::abs(d) / cn > best) {
          best = std::abs(d) / cn;
          enter = j;
          dir = up ? 1.0 : -1.0;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      // x_B moves by -dir * theta * B^-1 a_enter.
      Eigen::VectorXd alpha = lu.solve(A_.col(enter));
      double theta = hi_(enter) - lo_(enter);
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        double rate = -dir * alpha(i);
        if (std::abs(rate) <= 1e-11) continue;
        Eigen::Index k = basis_[static_cast<std::size_t>(i)];
        double room = rate < 0 ? (x_(k) - lo_(k)) / -rate : (hi_(k) - x_(k)) / rate;
        room = std::max(room, 0.0);
        if (room < theta - 1e-14 ||
            (leave >= 0 && room <= theta + 1e-14 && k < basis_[static_cast<std::size_t>(leave)])) {
          theta = room;
          leave = i;
          leave_to_upper = rate > 0;
        }
      }
      if (!std::isfinite(theta)) return LpStatus::unbounded;
      degenerate = theta <= 1e-14 ? degenerate + 1 : 0;

      for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) -= dir * theta * alpha(i);
      x_(enter) += dir * theta;
      if (leave < 0) {
        // The entering variable reached its other bound.
        x_(enter) = dir > 0 ? hi_(enter) : lo_(enter);
        continue;
      }
      Eigen::Index out = basis_[static_cast<std::size_t>(leave)];
      x_(out) = leave_to_upper ? hi_(out) : lo_(out);
      in_basis_[static_cast<std::size_t>(out)] = -1;
      basis_[static_cast<std::size_t>(leave)] = enter;
      in_basis_[static_cast<std::size_t>(enter)] = static_cast<int>(leave);
    }
    return LpStatus::iteration_limit;
  }

  Eigen::Index m_, n_;
  double eps_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_, c_, lo_, hi_, x_;
  std::vector<Eigen::Index> basis_;
  std::vector<int> in_basis_;
};

inline LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return BoundedSimplex(A, b, c, lower, upper).run();
}

}  // namespace kcell::detail

#endif  // KCELL_DETAIL_SIMPLEX_HPP_
