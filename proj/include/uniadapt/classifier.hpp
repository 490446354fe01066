// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"

namespace uniadapt {

struct SamplePrediction {
  std::size_t final_class = 0;
  Logits s_final;
  Logits s_main;
  Logits s_cache;
  double h_main = 1.0;
  double h_cache = 1.0;
  bool used_cache = false;
  std::size_t flips = 0;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Common surface of every streaming method: one feature in, one prediction
/// out, strictly in stream order.
class StreamClassifier {
 public:
  virtual ~StreamClassifier() = default;
  virtual SamplePrediction process(std::span<const double> feature) = 0;
  virtual void reset() = 0;
  virtual std::string_view method() const = 0;
};

/// Checks dimension and finiteness and returns a unit-norm copy of `feature`.
/// Inputs off the unit sphere are rescaled and reported to `warn`.
inline FeatureVec prepare_feature(std::span<const double> feature, std::size_t dim,
                                  std::size_t& normalized_inputs, const WarningHandler& warn) {
  require_same_dim(feature.size(), dim, "feature dim vs class embedding dim");
  if (!all_finite(feature)) throw Error(Errc::InvalidFeature, "feature contains NaN or Inf");
  if (is_unit(feature)) return FeatureVec(feature.begin(), feature.end());
  ++normalized_inputs;
  if (warn) {
    warn("input feature with norm " + std::to_string(l2_norm(feature)) +
         " was normalized to unit length");
  }
  return unit_normalize(feature);
}

/// Re-raises a library error with the stream position prepended.
template <class Fn>
decltype(auto) with_sample_index(std::size_t index, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "sample " + std::to_string(index) + ": " + e.detail());
  }
}

}  // namespace uniadapt
