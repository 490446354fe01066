// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense reference solve of (I + lambda * L) X = B by Cholesky factorization.
// Used to check the conjugate gradient path; cost is O(M^3).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"

namespace uniadapt {

inline constexpr std::size_t kDirectSolveMaxDim = 2000;

inline Matrix direct_solve_oracle(const Matrix& laplacian, double lambda, const Matrix& rhs) {
  const std::size_t m = laplacian.rows();
  require_same_dim(m, laplacian.cols(), "direct_solve_oracle (square)");
  require_same_dim(m, rhs.rows(), "direct_solve_oracle rows");
  if (m > kDirectSolveMaxDim) {
    throw Error(Errc::InvalidConfig, "dense oracle limited to M <= 2000");
  }
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "lambda_reg must be >= 0");

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index n = static_cast<Eigen::Index>(m);
  const Eigen::Index k = static_cast<Eigen::Index>(rhs.cols());
  Eigen::Map<const RowMajor> l(laplacian.data().data(), n, n);
  Eigen::Map<const RowMajor> b(rhs.data().data(), n, k);

  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) + lambda * l;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::SingularMatrix, "I + lambda L is not positive definite");
  }
  RowMajor x = llt.solve(Eigen::MatrixXd(b));

  Matrix out(m, rhs.cols());
  Eigen::Map<RowMajor>(out.data().data(), n, k) = x;
  return out;
}

}  // namespace uniadapt
