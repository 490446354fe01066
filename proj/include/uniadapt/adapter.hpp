// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The streaming engine. Per sample, in order:
//   zero-shot scores -> prototype insert/update -> stack prototypes ->
//   graph smoothing of their pseudo-labels -> hardening -> cache logits ->
//   entropy-weighted fusion.
// The sample's own cache update is visible to its own fusion step.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/error.hpp"
#include "uniadapt/fuse.hpp"
#include "uniadapt/numerics.hpp"
#include "uniadapt/proto_cache.hpp"
#include "uniadapt/reassign.hpp"
#include "uniadapt/spectral.hpp"

namespace uniadapt {

/// reassign_every value that disables the cache path entirely.
inline constexpr std::size_t kNeverReassign = std::numeric_limits<std::size_t>::max();

struct AdapterConfig {
  double beta = 10.0;          ///< confidence decay in the prototype update
  double gamma = 0.5;          ///< affinity sparsity threshold
  double lambda_reg = 0.3;     ///< smoothing strength
  std::size_t capacity = 30;   ///< prototypes per class (N)
  double tau = 1.0;            ///< softmax temperature
  double cg_tol = 1e-6;
  std::size_t cg_max_iter = 100;
  std::size_t reassign_every = 1;
  InsertPolicy insert_policy = InsertPolicy::AlwaysFill;
  double merge_similarity = 0.9;
  bool persist_reassignment = false;

  SmoothingOptions smoothing() const { return {gamma, lambda_reg, {cg_tol, cg_max_iter}}; }
  PrototypeUpdateOptions update_options() const { return {insert_policy, merge_similarity}; }

  void validate() const {
    auto fail = [](const char* field, const std::string& why) {
      throw Error(Errc::InvalidConfig, std::string(field) + " " + why);
    };
    if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta", "must be finite and >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must lie in [0, 1]");
    if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg)) fail("lambda_reg", "must be finite and >= 0");
    if (capacity < 1) fail("capacity_N", "must be >= 1");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau", "must be finite and > 0");
    if (!(cg_tol > 0.0)) fail("cg_tol", "must be > 0");
    if (cg_max_iter < 1) fail("cg_max_iter", "must be >= 1");
    if (reassign_every < 1) fail("reassign_every", "must be >= 1");
    if (!(merge_similarity >= -1.0 && merge_similarity <= 1.0)) {
      fail("merge_similarity", "must lie in [-1, 1]");
    }
  }
};

/// Result of one reassignment pass, kept for reuse between passes.
struct Reassignment {
  Matrix units;
  std::vector<std::size_t> origin_class;
  HardLabels hard;
  ClassNormalizer normalizer;
  SolveReport report;
  std::size_t flips = 0;
};

/// Wall-clock seconds spent per stage since construction or reset.
struct StageTimes {
  double prototyping = 0.0;
  double smoothing = 0.0;
  double fusion = 0.0;
};

namespace detail {

/// Prototype Gram matrix and initial soft labels kept in snapshot order and
/// patched per cache change, so a reassignment pass costs O(M^2) instead of
/// O(M^2 d). Entries are computed exactly as a from-scratch snapshot would.
class PrototypeGraph {
 public:
  void clear() {
    gram_.clear();
    labels_.clear();
  }

  std::size_t size() const noexcept { return gram_.size(); }

  void rebuild(const PrototypeCache& cache, const ClassEmbeddings& classes, double tau) {
    clear();
    for (std::size_t k = 0; k < cache.classes(); ++k) {
      for (std::size_t n = 0; n < cache.size(k); ++n) {
        on_insert(cache, classes, tau, k, n);
      }
    }
  }

  void on_insert(const PrototypeCache& cache, const ClassEmbeddings& classes, double tau,
                 std::size_t k, std::size_t n) {
    const std::size_t pos = position(cache, k, n);
    for (auto& row : gram_) row.insert(row.begin() + static_cast<std::ptrdiff_t>(pos), 0.0);
    gram_.insert(gram_.begin() + static_cast<std::ptrdiff_t>(pos),
                 std::vector<double>(gram_.size() + 1, 0.0));
    labels_.insert(labels_.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<double>{});
    refresh(cache, classes, tau, pos);
  }

  void on_update(const PrototypeCache& cache, const ClassEmbeddings& classes, double tau,
                 std::size_t k, std::size_t n) {
    refresh(cache, classes, tau, position(cache, k, n));
  }

  double similarity(std::size_t i, std::size_t j) const { return gram_[i][j]; }
  std::span<const double> initial_labels(std::size_t i) const { return labels_[i]; }

 private:
  static std::size_t position(const PrototypeCache& cache, std::size_t k, std::size_t n) {
    std::size_t pos = n;
    for (std::size_t c = 0; c < k; ++c) pos += cache.size(c);
    return pos;
  }

  void refresh(const PrototypeCache& cache, const ClassEmbeddings& classes, double tau,
               std::size_t pos) {
    std::vector<std::span<const double>> centers;
    centers.reserve(gram_.size());
    for (std::size_t k = 0; k < cache.classes(); ++k) {
      for (const Prototype& p : cache.prototypes(k)) centers.emplace_back(p.center);
    }
    // During rebuild only the first gram_.size() centers are tracked yet.
    for (std::size_t j = 0; j < gram_.size(); ++j) {
      const double s = dot(centers[pos], centers[j]);
      gram_[pos][j] = s;
      gram_[j][pos] = s;
    }
    labels_[pos] = softmax(classes.scores(centers[pos]), tau);
  }

  std::vector<std::vector<double>> gram_;
  std::vector<std::vector<double>> labels_;
};

}  // namespace detail

class Adapter final : public StreamClassifier {
 public:
  Adapter(ClassEmbeddings classes, AdapterConfig config)
      : classes_(std::move(classes)), config_(config) {
    config_.validate();
    if (classes_.classes() < 2) {
      throw Error(Errc::InvalidConfig, "class embeddings: need at least 2 classes");
    }
    cache_ = PrototypeCache(classes_.classes(), config_.capacity);
  }

  std::string_view method() const override { return "uni-adapter"; }

  SamplePrediction process(std::span<const double> feature) override {
    return with_sample_index(samples_seen_, [&] { return step(feature); });
  }

  void reset() override {
    cache_.clear();
    graph_.clear();
    last_.reset();
    samples_seen_ = 0;
    normalized_inputs_ = 0;
    total_flips_ = 0;
    times_ = {};
  }

  /// Replaces the prototype cache, e.g. with one restored from disk.
  void set_cache(PrototypeCache cache) {
    if (cache.classes() != classes_.classes() || cache.capacity() != config_.capacity) {
      throw Error(Errc::DimMismatch, "cache shape does not match classes/capacity");
    }
    for (std::size_t k = 0; k < cache.classes(); ++k) {
      for (const Prototype& p : cache.prototypes(k)) {
        require_same_dim(p.center.size(), classes_.dim(), "cached prototype dim");
      }
    }
    cache_ = std::move(cache);
    graph_.rebuild(cache_, classes_, config_.tau);
    last_.reset();
  }

  void set_warning_handler(WarningHandler handler) { warn_ = std::move(handler); }

  const ClassEmbeddings& classes() const noexcept { return classes_; }
  const AdapterConfig& config() const noexcept { return config_; }
  const PrototypeCache& cache() const noexcept { return cache_; }
  std::size_t samples_seen() const noexcept { return samples_seen_; }
  std::size_t normalized_inputs() const noexcept { return normalized_inputs_; }
  std::size_t total_flips() const noexcept { return total_flips_; }
  const StageTimes& stage_times() const noexcept { return times_; }
  const std::optional<Reassignment>& last_reassignment() const noexcept { return last_; }

 private:
  using Clock = std::chrono::steady_clock;

  static double seconds(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  }

  SamplePrediction step(std::span<const double> raw) {
    const auto t0 = Clock::now();
    const FeatureVec f = prepare_feature(raw, classes_.dim(), normalized_inputs_, warn_);
    const MainPrediction pred = predict_main(f, classes_, config_.tau);
    const UpdateOutcome outcome =
        update_or_insert(cache_, f, pred, classes_, config_.beta, config_.tau,
                         config_.update_options());
    if (outcome.kind == UpdateOutcome::Kind::Inserted) {
      graph_.on_insert(cache_, classes_, config_.tau, outcome.class_index, outcome.slot);
    } else {
      graph_.on_update(cache_, classes_, config_.tau, outcome.class_index, outcome.slot);
    }
    ++samples_seen_;
    const auto t1 = Clock::now();

    SamplePrediction out;
    out.s_main = pred.scores;
    out.h_main = pred.entropy;
    const bool reassigning = samples_seen_ % config_.reassign_every == 0 && cache_.total() > 0;
    if (reassigning) {
      last_ = reassign();
      out.flips = last_->flips;
      total_flips_ += last_->flips;
      if (config_.persist_reassignment) persist(*last_);
    }
    const auto t2 = Clock::now();

    if (last_) {
      out.s_cache = cache_logits(last_->units, last_->hard, last_->normalizer, f);
      FusionResult fused = entropy_fuse(out.s_main, out.s_cache, config_.tau);
      out.s_final = std::move(fused.fused);
      out.h_cache = fused.weights.h_cache;
      out.used_cache = true;
    } else {
      out.s_cache.assign(classes_.classes(), 0.0);
      out.s_final = out.s_main;
      out.h_cache = 1.0;
    }
    out.final_class = argmax(out.s_final);
    const auto t3 = Clock::now();

    times_.prototyping += seconds(t0, t1);
    if (reassigning) {
      times_.smoothing += seconds(t1, t2);
      times_.fusion += seconds(t2, t3);
    } else {
      times_.fusion += seconds(t1, t3);
    }
    return out;
  }

  Reassignment reassign() const {
    const std::size_t m = graph_.size();
    Reassignment r;
    r.units = Matrix(0, classes_.dim());
    Matrix initial(0, classes_.classes());
    for (std::size_t k = 0; k < cache_.classes(); ++k) {
      for (const Prototype& p : cache_.prototypes(k)) {
        r.units.append_row(p.center);
        r.origin_class.push_back(k);
      }
    }
    for (std::size_t i = 0; i < m; ++i) initial.append_row(graph_.initial_labels(i));

    const SmoothingOptions opts = config_.smoothing();
    const SparseSym affinity = threshold_affinity(
        m, opts.gamma, [&](std::size_t i, std::size_t j) { return graph_.similarity(i, j); });
    SolveResult solved = smooth_labels(affinity, initial, opts.lambda_reg, opts.cg);
    r.hard = harden(solved.solution);
    r.normalizer = class_normalizer(r.hard);
    r.report = std::move(solved.report);
    r.flips = reassignment_flips(r.hard, r.origin_class);
    return r;
  }

  /// Moves relabeled prototypes into their new class where it has room.
  void persist(const Reassignment& r) {
    if (r.flips == 0) return;
    std::vector<std::vector<Prototype>> lists(cache_.classes());
    std::vector<std::pair<std::size_t, Prototype>> movers;
    std::size_t m = 0;
    for (std::size_t k = 0; k < cache_.classes(); ++k) {
      for (const Prototype& p : cache_.prototypes(k)) {
        if (r.hard.assignment[m] == k) {
          lists[k].push_back(p);
        } else {
          movers.emplace_back(m, p);
        }
        ++m;
      }
    }
    // A move is accepted only while the target's occupancy (counting
    // prototypes that have not left yet) is below capacity.
    std::vector<std::size_t> occupancy(cache_.classes());
    for (std::size_t k = 0; k < cache_.classes(); ++k) occupancy[k] = cache_.size(k);
    for (auto& [idx, proto] : movers) {
      const std::size_t target = r.hard.assignment[idx];
      const std::size_t origin = r.origin_class[idx];
      if (occupancy[target] < config_.capacity) {
        ++occupancy[target];
        --occupancy[origin];
        lists[target].push_back(std::move(proto));
      } else {
        lists[origin].push_back(std::move(proto));
      }
    }
    PrototypeCache rebuilt(cache_.classes(), config_.capacity);
    for (std::size_t k = 0; k < lists.size(); ++k) {
      for (auto& p : lists[k]) rebuilt.insert(k, std::move(p));
    }
    cache_ = std::move(rebuilt);
    graph_.rebuild(cache_, classes_, config_.tau);
  }

  ClassEmbeddings classes_;
  AdapterConfig config_;
  PrototypeCache cache_;
  detail::PrototypeGraph graph_;
  std::optional<Reassignment> last_;
  std::size_t samples_seen_ = 0;
  std::size_t normalized_inputs_ = 0;
  std::size_t total_flips_ = 0;
  StageTimes times_;
  WarningHandler warn_;
};

}  // namespace uniadapt
