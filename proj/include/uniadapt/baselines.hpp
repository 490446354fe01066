// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Comparison methods behind the same StreamClassifier surface:
//  * ConfidenceCache keeps the N lowest-entropy raw features per pseudo-class
//    and fuses their per-class mean similarity with the zero-shot logits.
//  * ZeroShot returns the zero-shot logits untouched.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "uniadapt/classifier.hpp"
#include "uniadapt/fuse.hpp"
#include "uniadapt/proto_cache.hpp"
#include "uniadapt/reassign.hpp"

namespace uniadapt {

struct ConfidenceCacheEntry {
  FeatureVec feature;
  double entropy = 1.0;
};

struct ConfidenceCacheConfig {
  std::size_t capacity = 30;
  double tau = 1.0;
  bool smoothing = false;  ///< run graph smoothing over the stored features
  SmoothingOptions smoothing_options;
};

class ConfidenceCache final : public StreamClassifier {
 public:
  ConfidenceCache(ClassEmbeddings classes, ConfidenceCacheConfig config)
      : classes_(std::move(classes)), config_(config), lists_(classes_.classes()) {
    if (config_.capacity < 1) throw Error(Errc::InvalidConfig, "capacity_N must be >= 1");
    if (!(config_.tau > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
  }

  std::string_view method() const override { return "confidence-cache"; }

  SamplePrediction process(std::span<const double> feature) override {
    return with_sample_index(samples_seen_, [&] { return step(feature); });
  }

  void reset() override {
    for (auto& list : lists_) list.clear();
    samples_seen_ = 0;
    normalized_inputs_ = 0;
  }

  void set_warning_handler(WarningHandler handler) { warn_ = std::move(handler); }

  /// Entries of class k, ascending by entropy.
  const std::vector<ConfidenceCacheEntry>& entries(std::size_t k) const { return lists_.at(k); }
  std::size_t samples_seen() const noexcept { return samples_seen_; }

 private:
  SamplePrediction step(std::span<const double> raw) {
    const FeatureVec f = prepare_feature(raw, classes_.dim(), normalized_inputs_, warn_);
    const MainPrediction pred = predict_main(f, classes_, config_.tau);
    insert(pred.pseudo_class, ConfidenceCacheEntry{f, pred.entropy});
    ++samples_seen_;

    Matrix units(0, classes_.dim());
    std::vector<std::size_t> origin;
    for (std::size_t k = 0; k < lists_.size(); ++k) {
      for (const auto& e : lists_[k]) {
        units.append_row(e.feature);
        origin.push_back(k);
      }
    }

    HardLabels hard;
    SamplePrediction out;
    if (config_.smoothing) {
      Matrix initial(0, classes_.classes());
      for (std::size_t m = 0; m < units.rows(); ++m) {
        initial.append_row(softmax(classes_.scores(units.row(m)), config_.tau));
      }
      hard = harden(smooth_labels(units, initial, config_.smoothing_options).solution);
      out.flips = reassignment_flips(hard, origin);
    } else {
      hard.onehot = Matrix(origin.size(), classes_.classes());
      for (std::size_t m = 0; m < origin.size(); ++m) hard.onehot(m, origin[m]) = 1.0;
      hard.assignment = std::move(origin);
    }

    out.s_main = pred.scores;
    out.h_main = pred.entropy;
    out.s_cache = cache_logits(units, hard, class_normalizer(hard), f);
    FusionResult fused = entropy_fuse(out.s_main, out.s_cache, config_.tau);
    out.s_final = std::move(fused.fused);
    out.h_cache = fused.weights.h_cache;
    out.used_cache = true;
    out.final_class = argmax(out.s_final);
    return out;
  }

  void insert(std::size_t k, ConfidenceCacheEntry entry) {
    auto& list = lists_[k];
    auto pos = std::upper_bound(list.begin(), list.end(), entry.entropy,
                                [](double h, const ConfidenceCacheEntry& e) { return h < e.entropy; });
    list.insert(pos, std::move(entry));
    if (list.size() > config_.capacity) list.pop_back();
  }

  ClassEmbeddings classes_;
  ConfidenceCacheConfig config_;
  std::vector<std::vector<ConfidenceCacheEntry>> lists_;
  std::size_t samples_seen_ = 0;
  std::size_t normalized_inputs_ = 0;
  WarningHandler warn_;
};

class ZeroShot final : public StreamClassifier {
 public:
  ZeroShot(ClassEmbeddings classes, double tau) : classes_(std::move(classes)), tau_(tau) {
    if (!(tau_ > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
  }

  std::string_view method() const override { return "zero-shot"; }

  SamplePrediction process(std::span<const double> feature) override {
    const std::size_t index = samples_seen_++;
    return with_sample_index(index, [&] {
      const FeatureVec f = prepare_feature(feature, classes_.dim(), normalized_inputs_, warn_);
      const MainPrediction pred = predict_main(f, classes_, tau_);
      SamplePrediction out;
      out.s_main = pred.scores;
      out.s_final = pred.scores;
      out.s_cache.assign(classes_.classes(), 0.0);
      out.h_main = pred.entropy;
      out.final_class = pred.pseudo_class;
      return out;
    });
  }

  void reset() override {
    samples_seen_ = 0;
    normalized_inputs_ = 0;
  }

  void set_warning_handler(WarningHandler handler) { warn_ = std::move(handler); }

 private:
  ClassEmbeddings classes_;
  double tau_;
  std::size_t samples_seen_ = 0;
  std::size_t normalized_inputs_ = 0;
  WarningHandler warn_;
};

}  // namespace uniadapt
