// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Sparse symmetric matrices in compressed-row layout, the thresholded
// prototype affinity, its normalized Laplacian, and a multi-column conjugate
// gradient solver for (I + lambda * L) X = B.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"

namespace uniadapt {

/// Entries with magnitude below this are never stored.
inline constexpr double kStoredZeroTol = 1e-15;

class SparseSym {
 public:
  SparseSym() : row_offsets_(1, 0) {}

  /// Takes ownership of CSR arrays. Column indices must be strictly
  /// increasing per row; symmetry is checked to 1e-12.
  SparseSym(std::size_t dim, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values)
      : dim_(dim),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return row_offsets_.back(); }
  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Stored value at (i, j), or 0 when absent.
  double at(std::size_t i, std::size_t j) const {
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      if (col_indices_[p] == j) return values_[p];
      if (col_indices_[p] > j) break;
    }
    return 0.0;
  }

  double row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) s += values_[p];
    return s;
  }

  Matrix to_dense() const {
    Matrix out(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        out(i, col_indices_[p]) = values_[p];
      }
    }
    return out;
  }

  /// y = this * x for a row-major block of `cols` vectors.
  void multiply(std::span<const double> x, std::span<double> y, std::size_t cols) const {
    for (std::size_t i = 0; i < dim_; ++i) {
      double* yi = y.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) yi[c] = 0.0;
      for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        const double v = values_[p];
        const double* xj = x.data() + col_indices_[p] * cols;
        for (std::size_t c = 0; c < cols; ++c) yi[c] += v * xj[c];
      }
    }
  }

  /// y = x + lambda * (this * x) for a row-major block of `cols` right-hand sides.
  void shifted_multiply(double lambda, std::span<const double> x, std::span<double> y,
                        std::size_t cols) const {
    multiply(x, y, cols);
    for (std::size_t i = 0; i < dim_ * cols; ++i) y[i] = x[i] + lambda * y[i];
  }

 private:
  void validate() const {
    if (row_offsets_.size() != dim_ + 1 || row_offsets_.front() != 0 ||
        col_indices_.size() != row_offsets_.back() || values_.size() != col_indices_.size()) {
      throw Error(Errc::DimMismatch, "inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      if (row_offsets_[i] > row_offsets_[i + 1]) {
        throw Error(Errc::DimMismatch, "row offsets must be non-decreasing");
      }
      for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        const std::size_t j = col_indices_[p];
        if (j >= dim_ || (p > row_offsets_[i] && col_indices_[p - 1] >= j)) {
          throw Error(Errc::DimMismatch, "column indices must be in range and strictly increasing");
        }
        if (std::abs(values_[p] - at(j, i)) > 1e-12) {
          throw Error(Errc::DimMismatch, "matrix is not symmetric at (" + std::to_string(i) +
                                             ", " + std::to_string(j) + ")");
        }
      }
    }
  }

  std::size_t dim_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

/// Builds the thresholded affinity over `m` nodes from a similarity oracle.
/// `sim(i, j)` is queried only for i < j so the result is exactly symmetric.
/// Off-diagonal entries are kept when sim >= gamma; the diagonal is always 1.
template <class SimFn>
SparseSym threshold_affinity(std::size_t m, double gamma, SimFn&& sim) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(Errc::InvalidConfig, "gamma must lie in [0, 1]");
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> upper(m);
  std::vector<std::size_t> row_len(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double s = sim(i, j);
      if (s >= gamma && std::abs(s) >= kStoredZeroTol) {
        upper[i].emplace_back(j, s);
        ++row_len[i];
        ++row_len[j];
      }
    }
  }
  std::vector<std::size_t> offsets(m + 1, 0);
  for (std::size_t i = 0; i < m; ++i) offsets[i + 1] = offsets[i] + row_len[i];
  std::vector<std::size_t> cols(offsets[m]);
  std::vector<double> vals(offsets[m]);
  std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
  // Rows are filled in ascending column order: lower part (from earlier rows),
  // then the diagonal, then the upper part.
  for (std::size_t i = 0; i < m; ++i) {
    cols[fill[i]] = i;
    vals[fill[i]] = 1.0;
    ++fill[i];
    for (const auto& [j, s] : upper[i]) {
      cols[fill[i]] = j;
      vals[fill[i]] = s;
      ++fill[i];
      cols[fill[j]] = i;
      vals[fill[j]] = s;
      ++fill[j];
    }
  }
  return SparseSym(m, std::move(offsets), std::move(cols), std::move(vals));
}

/// Rows of `units` must be unit-norm. Similarities are plain inner products.
inline SparseSym build_affinity(const Matrix& units, double gamma) {
  for (std::size_t i = 0; i < units.rows(); ++i) {
    if (!is_unit(units.row(i))) {
      throw Error(Errc::NotNormalized, "affinity row " + std::to_string(i) + " is not unit-norm");
    }
  }
  return threshold_affinity(units.rows(), gamma, [&](std::size_t i, std::size_t j) {
    return dot(units.row(i), units.row(j));
  });
}

/// I - D^{-1/2} A D^{-1/2}.
inline SparseSym normalized_laplacian(const SparseSym& affinity) {
  const std::size_t m = affinity.dim();
  const auto offsets = affinity.row_offsets();
  const auto cols = affinity.col_indices();
  const auto vals = affinity.values();

  std::vector<double> inv_sqrt_deg(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double deg = affinity.row_sum(i);
    if (!(deg > 0.0)) {
      throw Error(Errc::IsolatedNode, "node " + std::to_string(i) + " has non-positive degree");
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }

  std::vector<std::size_t> out_offsets(m + 1, 0);
  std::vector<std::size_t> out_cols;
  std::vector<double> out_vals;
  out_cols.reserve(affinity.nnz() + m);
  out_vals.reserve(affinity.nnz() + m);
  auto push = [&](std::size_t j, double v) {
    if (std::abs(v) >= kStoredZeroTol) {
      out_cols.push_back(j);
      out_vals.push_back(v);
    }
  };
  for (std::size_t i = 0; i < m; ++i) {
    bool diag_done = false;
    for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
      const std::size_t j = cols[p];
      if (!diag_done && j >= i) {
        if (j > i) push(i, 1.0);
        diag_done = true;
      }
      const double scaled = vals[p] * (inv_sqrt_deg[i] * inv_sqrt_deg[j]);
      push(j, (j == i ? 1.0 : 0.0) - scaled);
    }
    if (!diag_done) push(i, 1.0);
    out_offsets[i + 1] = out_cols.size();
  }
  return SparseSym(m, std::move(out_offsets), std::move(out_cols), std::move(out_vals));
}

struct CgOptions {
  double tolerance = 1e-6;  ///< relative residual ||r|| / ||b||
  std::size_t max_iterations = 100;
};

struct SolveReport {
  std::vector<std::size_t> iterations_per_column;
  std::vector<bool> converged;
  double max_residual = 0.0;  ///< largest final relative residual over columns

  std::size_t total_iterations() const {
    std::size_t n = 0;
    for (std::size_t it : iterations_per_column) n += it;
    return n;
  }
  bool all_converged() const {
    for (bool c : converged) {
      if (!c) return false;
    }
    return true;
  }
};

struct SolveResult {
  Matrix solution;
  SolveReport report;
};

/// Solves (I + lambda * L) X = rhs column by column with conjugate gradient.
///
/// Each column starts from its own right-hand side (warm start) and stops once
/// ||r|| <= tolerance * ||b|| or after max_iterations. The columns share the
/// matrix pass but never each other's scalars, so every column's result is
/// the same as a standalone solve of that column.
inline SolveResult cg_solve(const SparseSym& laplacian, double lambda, const Matrix& rhs,
                            const CgOptions& options = {}) {
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "lambda_reg must be >= 0");
  if (!(options.tolerance > 0.0)) throw Error(Errc::InvalidConfig, "CG tolerance must be > 0");
  require_same_dim(laplacian.dim(), rhs.rows(), "cg_solve rows");
  if (!all_finite(rhs.data())) throw Error(Errc::InvalidRHS, "right-hand side is not finite");

  const std::size_t m = rhs.rows();
  const std::size_t k = rhs.cols();
  SolveResult result{rhs, {}};
  result.report.iterations_per_column.assign(k, 0);
  result.report.converged.assign(k, false);
  if (m == 0 || k == 0) {
    result.report.converged.assign(k, true);
    return result;
  }

  auto x = result.solution.data();
  const auto b = rhs.data();
  std::vector<double> r(m * k), p(m * k), q(m * k);
  laplacian.shifted_multiply(lambda, x, q, k);
  for (std::size_t i = 0; i < m * k; ++i) r[i] = b[i] - q[i];

  std::vector<double> rr(k, 0.0), bb(k, 0.0), pq(k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      rr[c] += r[i * k + c] * r[i * k + c];
      bb[c] += b[i * k + c] * b[i * k + c];
    }
  }
  std::vector<double> threshold(k);
  std::vector<char> active(k, 0);
  std::size_t n_active = 0;
  for (std::size_t c = 0; c < k; ++c) {
    threshold[c] = options.tolerance * std::sqrt(bb[c]);
    if (std::sqrt(rr[c]) <= threshold[c]) {
      result.report.converged[c] = true;
    } else {
      active[c] = 1;
      ++n_active;
    }
  }
  p = r;

  for (std::size_t it = 1; it <= options.max_iterations && n_active > 0; ++it) {
    laplacian.shifted_multiply(lambda, p, q, k);
    std::fill(pq.begin(), pq.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < k; ++c) pq[c] += p[i * k + c] * q[i * k + c];
    }
    std::vector<double> alpha(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      if (!active[c]) continue;
      if (!(pq[c] > 0.0)) {  // breakdown: direction carries no energy
        active[c] = 0;
        --n_active;
        continue;
      }
      alpha[c] = rr[c] / pq[c];
      result.report.iterations_per_column[c] = it;
    }
    std::vector<double> rr_new(k, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        if (!active[c]) continue;
        const std::size_t idx = i * k + c;
        x[idx] += alpha[c] * p[idx];
        r[idx] -= alpha[c] * q[idx];
        rr_new[c] += r[idx] * r[idx];
      }
    }
    std::vector<double> beta(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      if (!active[c]) continue;
      if (std::sqrt(rr_new[c]) <= threshold[c]) {
        result.report.converged[c] = true;
        active[c] = 0;
        --n_active;
      } else {
        beta[c] = rr_new[c] / rr[c];
      }
      rr[c] = rr_new[c];
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        if (!active[c]) continue;
        const std::size_t idx = i * k + c;
        p[idx] = r[idx] + beta[c] * p[idx];
      }
    }
  }

  for (std::size_t c = 0; c < k; ++c) {
    const double rel = bb[c] > 0.0 ? std::sqrt(rr[c] / bb[c]) : std::sqrt(rr[c]);
    result.report.max_residual = std::max(result.report.max_residual, rel);
  }
  return result;
}

/// Tr(Z^T L Z), the graph-smoothness penalty of a label matrix.
inline double laplacian_quadratic_form(const SparseSym& laplacian, const Matrix& z) {
  const std::size_t k = z.cols();
  std::vector<double> lz(z.rows() * k);
  laplacian.multiply(z.data(), lz, k);
  double tr = 0.0;
  for (std::size_t i = 0; i < z.rows() * k; ++i) tr += z.data()[i] * lz[i];
  return tr;
}

}  // namespace uniadapt
