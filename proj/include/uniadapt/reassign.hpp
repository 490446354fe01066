// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Prototype reassignment: smooth the prototypes' soft pseudo-labels over the
// thresholded affinity graph, Z* = (I + lambda L_norm)^{-1} Z0, then keep
// only the largest entry of each row.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"
#include "uniadapt/spectral.hpp"

namespace uniadapt {

struct SmoothingOptions {
  double gamma = 0.5;
  double lambda_reg = 0.3;
  CgOptions cg;
};

/// Smoothing over an already-thresholded affinity.
inline SolveResult smooth_labels(const SparseSym& affinity, const Matrix& initial_labels,
                                 double lambda_reg, const CgOptions& cg) {
  require_same_dim(affinity.dim(), initial_labels.rows(), "affinity vs label rows");
  return cg_solve(normalized_laplacian(affinity), lambda_reg, initial_labels, cg);
}

inline SolveResult smooth_labels(const Matrix& units, const Matrix& initial_labels,
                                 const SmoothingOptions& options) {
  require_same_dim(units.rows(), initial_labels.rows(), "prototype rows vs label rows");
  return smooth_labels(build_affinity(units, options.gamma), initial_labels, options.lambda_reg,
                       options.cg);
}

struct HardLabels {
  std::vector<std::size_t> assignment;  ///< class per prototype
  Matrix onehot;                        ///< M x K indicator matrix
};

inline HardLabels harden(const Matrix& labels) {
  if (labels.rows() == 0) throw Error(Errc::InvalidLabels, "no label rows to harden");
  if (!all_finite(labels.data())) throw Error(Errc::InvalidLabels, "labels contain non-finite values");
  HardLabels out{std::vector<std::size_t>(labels.rows()), Matrix(labels.rows(), labels.cols())};
  for (std::size_t m = 0; m < labels.rows(); ++m) {
    out.assignment[m] = argmax(labels.row(m));
    out.onehot(m, out.assignment[m]) = 1.0;
  }
  return out;
}

/// Number of prototypes whose smoothed label differs from their cache class.
inline std::size_t reassignment_flips(const HardLabels& hard,
                                      std::span<const std::size_t> origin_class) {
  require_same_dim(hard.assignment.size(), origin_class.size(), "reassignment_flips");
  std::size_t flips = 0;
  for (std::size_t m = 0; m < origin_class.size(); ++m) {
    if (hard.assignment[m] != origin_class[m]) ++flips;
  }
  return flips;
}

}  // namespace uniadapt
