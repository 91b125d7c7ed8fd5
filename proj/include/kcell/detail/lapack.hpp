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

#ifndef KCELL_DETAIL_LAPACK_HPP_
#define KCELL_DETAIL_LAPACK_HPP_

#include <lapacke.h>

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace kcell::detail {

/// Solves K X = B for symmetric (possibly indefinite) K with a
/// Bunch-Kaufman factorization. Returns nullopt when K is singular.
inline std::optional<Eigen::MatrixXd> solve_symmetric(Eigen::MatrixXd K, Eigen::MatrixXd B) {
  const lapack_int n = static_cast<lapack_int>(K.rows());
  const lapack_int nrhs = static_cast<lapack_int>(B.cols());
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
  lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n, K.data(), n, ipiv.data());
  if (info != 0) return std::nullopt;
  info = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n, nrhs, K.data(), n, ipiv.data(), B.data(), n);
  if (info != 0) return std::nullopt;
  return B;
}

}  // namespace kcell::detail

#endif  // KCELL_DETAIL_LAPACK_HPP_
