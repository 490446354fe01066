// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Synthetic class embeddings and multi-modal feature streams.
//
// Every class owns `modes_per_class` unit mode centers placed at angular
// distance `mode_spread` from its class embedding in random directions. A
// sample picks a class uniformly, then a mode, then is rotated away from the
// mode center by `sample_noise` radians in a random direction.
//
// With confidence_skew > 0, mode 0 of every class is the "tight" mode: its
// center sits at mode_spread / (1 + skew), its jitter is sample_noise / (1 + skew)
// and it is drawn with weight 1 + skew / 2 against 1 for the other modes. Its
// samples are then systematically the most confident ones of their class.
//
// shared_direction in [0, 1) mixes one per-class offset direction into every
// mode's direction with that weight, so the modes of a class lean the same
// way and the graph between them is denser.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"
#include "uniadapt/proto_cache.hpp"
#include "uniadapt/streams.hpp"

namespace uniadapt {

inline constexpr double kMaxClassCosine = 0.3;

namespace detail {

inline FeatureVec random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    FeatureVec v(dim);
    for (double& x : v) x = normal(rng);
    if (l2_norm(v) > 1e-9) return unit_normalize(v);
  }
}

/// Random unit vector orthogonal to the unit vector `axis`.
inline FeatureVec random_orthogonal(std::span<const double> axis, std::mt19937_64& rng) {
  for (;;) {
    FeatureVec v = random_unit(axis.size(), rng);
    const double along = dot(v, axis);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= along * axis[i];
    if (l2_norm(v) > 1e-6) return unit_normalize(v);
  }
}

/// cos(angle) * axis + sin(angle) * dir, normalized.
inline FeatureVec rotate_towards(std::span<const double> axis, std::span<const double> dir,
                                 double angle) {
  FeatureVec out(axis.size());
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * axis[i] + s * dir[i];
  return unit_normalize(out);
}

}  // namespace detail

/// K unit vectors with pairwise |cosine| <= 0.3, rejection-sampled from the
/// uniform sphere. Names are "class_0" .. "class_{K-1}".
inline ClassEmbeddings gen_class_embeddings(std::size_t classes, std::size_t dim,
                                            std::uint64_t seed,
                                            std::size_t attempts_per_class = 10000) {
  if (dim < 2) throw Error(Errc::InvalidConfig, "embedding dimension must be >= 2");
  std::mt19937_64 rng(seed);
  Matrix rows(0, dim);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < classes; ++k) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < attempts_per_class && !placed; ++attempt) {
      FeatureVec candidate = detail::random_unit(dim, rng);
      placed = true;
      for (std::size_t j = 0; j < rows.rows() && placed; ++j) {
        placed = std::abs(dot(candidate, rows.row(j))) <= kMaxClassCosine;
      }
      if (placed) rows.append_row(candidate);
    }
    if (!placed) {
      throw Error(Errc::CannotSeparate, "could not place class " + std::to_string(k) + " of " +
                                            std::to_string(classes) + " in d=" +
                                            std::to_string(dim) + "; try a larger dimension");
    }
    names.push_back("class_" + std::to_string(k));
  }
  return ClassEmbeddings(std::move(names), std::move(rows));
}

struct SynthSpec {
  std::size_t modes_per_class = 3;
  double mode_spread = 1.0;   ///< radians between class embedding and mode centers
  double sample_noise = 0.5;  ///< radians of within-mode jitter
  std::size_t n_samples = 1000;
  double confidence_skew = 0.0;
  double shared_direction = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (modes_per_class < 1) throw Error(Errc::InvalidConfig, "modes_per_class must be >= 1");
    if (!(mode_spread >= 0.0) || !(sample_noise >= 0.0)) {
      throw Error(Errc::InvalidConfig, "mode_spread and sample_noise must be >= 0");
    }
    if (!(confidence_skew >= 0.0)) throw Error(Errc::InvalidConfig, "confidence_skew must be >= 0");
    if (!(shared_direction >= 0.0 && shared_direction < 1.0)) {
      throw Error(Errc::InvalidConfig, "shared_direction must lie in [0, 1)");
    }
  }
};

struct SynthStream {
  std::vector<StreamRecord> records;
  std::vector<std::size_t> modes;  ///< mode index of each record
  Matrix mode_centers;             ///< (K * modes_per_class) x d, class-major
};

inline SynthStream gen_stream_detailed(const ClassEmbeddings& classes, const SynthSpec& spec) {
  spec.validate();
  const std::size_t k_classes = classes.classes();
  const std::size_t modes = spec.modes_per_class;
  const bool skewed = spec.confidence_skew > 0.0;
  const double tighten = 1.0 + spec.confidence_skew;
  std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ull);

  SynthStream out;
  out.mode_centers = Matrix(0, classes.dim());
  const double rho = spec.shared_direction;
  const double own = std::sqrt(1.0 - rho * rho);
  for (std::size_t k = 0; k < k_classes; ++k) {
    const FeatureVec shared = detail::random_orthogonal(classes.row(k), rng);
    for (std::size_t j = 0; j < modes; ++j) {
      const double angle = (skewed && j == 0) ? spec.mode_spread / tighten : spec.mode_spread;
      FeatureVec dir = detail::random_orthogonal(classes.row(k), rng);
      for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = rho * shared[i] + own * dir[i];
      dir = unit_normalize(dir);
      out.mode_centers.append_row(detail::rotate_towards(classes.row(k), dir, angle));
    }
  }

  std::vector<double> weights(modes, 1.0);
  if (skewed) weights[0] = 1.0 + spec.confidence_skew / 2.0;
  std::uniform_int_distribution<std::size_t> pick_class(0, k_classes - 1);
  std::discrete_distribution<std::size_t> pick_mode(weights.begin(), weights.end());

  struct Drawn {
    StreamRecord record;
    std::size_t mode;
  };
  std::vector<Drawn> drawn;
  drawn.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const std::size_t k = pick_class(rng);
    const std::size_t j = pick_mode(rng);
    const auto center = out.mode_centers.row(k * modes + j);
    const double noise = (skewed && j == 0) ? spec.sample_noise / tighten : spec.sample_noise;
    FeatureVec f;
    if (noise == 0.0) {
      f.assign(center.begin(), center.end());
    } else {
      f = detail::rotate_towards(center, detail::random_orthogonal(center, rng), noise);
    }
    drawn.push_back({StreamRecord{std::move(f), k}, j});
  }
  std::shuffle(drawn.begin(), drawn.end(), rng);

  out.records.reserve(drawn.size());
  out.modes.reserve(drawn.size());
  for (auto& d : drawn) {
    out.records.push_back(std::move(d.record));
    out.modes.push_back(d.mode);
  }
  return out;
}

inline std::vector<StreamRecord> gen_stream(const ClassEmbeddings& classes, const SynthSpec& spec) {
  return gen_stream_detailed(classes, spec).records;
}

}  // namespace uniadapt
