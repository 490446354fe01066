// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Cache logits (per-class mean similarity to the hardened prototypes) and the
// entropy-weighted fusion of main and cache logits.

#include <cstddef>
#include <span>
#include <vector>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"
#include "uniadapt/reassign.hpp"

namespace uniadapt {

struct ClassNormalizer {
  std::vector<double> inv_counts;            ///< 1 / count, or 0 for empty classes
  std::vector<std::size_t> prototype_counts;
};

inline ClassNormalizer class_normalizer(const HardLabels& hard) {
  const std::size_t k = hard.onehot.cols();
  ClassNormalizer out{std::vector<double>(k, 0.0), std::vector<std::size_t>(k, 0)};
  for (std::size_t m = 0; m < hard.onehot.rows(); ++m) {
    for (std::size_t c = 0; c < k; ++c) {
      if (hard.onehot(m, c) != 0.0) ++out.prototype_counts[c];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (out.prototype_counts[c] > 0) {
      out.inv_counts[c] = 1.0 / static_cast<double>(out.prototype_counts[c]);
    }
  }
  return out;
}

/// Lambda * Z*^T * (U f): the mean similarity of `feature` to each class's
/// prototypes, 0 for classes without any.
inline Logits cache_logits(const Matrix& units, const HardLabels& hard, const ClassNormalizer& norm,
                           std::span<const double> feature) {
  if (units.rows() == 0) throw Error(Errc::EmptyCache, "no prototypes to score against");
  require_same_dim(units.rows(), hard.assignment.size(), "prototypes vs labels");
  require_same_dim(units.cols(), feature.size(), "prototype vs feature dim");
  const std::size_t k = norm.inv_counts.size();
  Logits sums(k, 0.0);
  for (std::size_t m = 0; m < units.rows(); ++m) {
    sums[hard.assignment[m]] += dot(units.row(m), feature);
  }
  for (std::size_t c = 0; c < k; ++c) sums[c] *= norm.inv_counts[c];
  return sums;
}

struct FusionWeights {
  double h_main = 1.0;
  double h_cache = 1.0;

  /// Coefficient applied to the main logits.
  double main_weight() const {
    const double total = h_main + h_cache;
    return total < kFusionDegenerate ? 0.5 : h_cache / total;
  }
  double cache_weight() const { return 1.0 - main_weight(); }

  static constexpr double kFusionDegenerate = 1e-12;
};

struct FusionResult {
  Logits fused;
  FusionWeights weights;
};

/// Combines the two logit vectors for given entropies: each side is weighted
/// by the other side's entropy, so the more certain source dominates. Both
/// entropies ~0 falls back to the plain mean.
inline Logits fuse_logits(std::span<const double> main, std::span<const double> cache,
                          const FusionWeights& weights) {
  require_same_dim(main.size(), cache.size(), "main vs cache logits");
  Logits fused(main.size());
  const double total = weights.h_main + weights.h_cache;
  for (std::size_t i = 0; i < main.size(); ++i) {
    fused[i] = total < FusionWeights::kFusionDegenerate
                   ? (main[i] + cache[i]) / 2.0
                   : (weights.h_cache * main[i] + weights.h_main * cache[i]) / total;
  }
  return fused;
}

inline FusionResult entropy_fuse(std::span<const double> main, std::span<const double> cache,
                                 double tau) {
  require_same_dim(main.size(), cache.size(), "main vs cache logits");
  FusionWeights weights{norm_entropy(softmax(main, tau)), norm_entropy(softmax(cache, tau))};
  return {fuse_logits(main, cache, weights), weights};
}

}  // namespace uniadapt
