// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Online prototyping: every class keeps up to N unit-norm cluster centers,
// each with the number of samples folded into it. New samples either open a
// free slot or pull the nearest center of their pseudo-class towards them,
// weighted by how confident the sample and the center are.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"

namespace uniadapt {

/// The fixed zero-shot classifier: K named unit rows.
class ClassEmbeddings {
 public:
  ClassEmbeddings() = default;
  ClassEmbeddings(std::vector<std::string> names, Matrix rows)
      : names_(std::move(names)), rows_(std::move(rows)) {
    if (rows_.rows() < 2) {
      throw Error(Errc::InvalidConfig, "need at least 2 classes, got " +
                                           std::to_string(rows_.rows()));
    }
    require_same_dim(names_.size(), rows_.rows(), "class names vs rows");
    if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size()) {
      throw Error(Errc::InvalidConfig, "class names must be unique");
    }
    for (std::size_t i = 0; i < rows_.rows(); ++i) {
      if (!all_finite(rows_.row(i)) || !is_unit(rows_.row(i))) {
        throw Error(Errc::NotNormalized, "class embedding " + names_[i] + " is not unit-norm");
      }
    }
  }

  std::size_t classes() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const Matrix& rows() const noexcept { return rows_; }
  std::span<const double> row(std::size_t k) const { return rows_.row(k); }

  /// Cosine similarity of `v` against every class row.
  Logits scores(std::span<const double> v) const {
    require_same_dim(v.size(), dim(), "feature vs class embedding dim");
    Logits s(classes());
    for (std::size_t i = 0; i < classes(); ++i) s[i] = cosine_sim(rows_.row(i), v);
    return s;
  }

 private:
  std::vector<std::string> names_;
  Matrix rows_;
};

struct Prototype {
  FeatureVec center;
  std::size_t count = 1;
};

class PrototypeCache {
 public:
  PrototypeCache() = default;
  PrototypeCache(std::size_t classes, std::size_t capacity)
      : capacity_(capacity), per_class_(classes) {}

  std::size_t classes() const noexcept { return per_class_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size(std::size_t k) const { return per_class_.at(k).size(); }
  bool full(std::size_t k) const { return size(k) >= capacity_; }

  std::size_t total() const noexcept {
    std::size_t m = 0;
    for (const auto& list : per_class_) m += list.size();
    return m;
  }

  const std::vector<Prototype>& prototypes(std::size_t k) const { return per_class_.at(k); }
  const Prototype& at(std::size_t k, std::size_t n) const { return per_class_.at(k).at(n); }
  Prototype& at(std::size_t k, std::size_t n) { return per_class_.at(k).at(n); }

  /// Appends to class k and returns the new slot index.
  std::size_t insert(std::size_t k, Prototype proto) {
    auto& list = per_class_.at(k);
    if (list.size() >= capacity_) {
      throw Error(Errc::InvalidConfig, "class " + std::to_string(k) + " is at capacity");
    }
    list.push_back(std::move(proto));
    return list.size() - 1;
  }

  Prototype remove(std::size_t k, std::size_t n) {
    auto& list = per_class_.at(k);
    Prototype out = std::move(list.at(n));
    list.erase(list.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  void clear() {
    for (auto& list : per_class_) list.clear();
  }

  friend bool operator==(const PrototypeCache& a, const PrototypeCache& b) {
    if (a.capacity_ != b.capacity_ || a.per_class_.size() != b.per_class_.size()) return false;
    for (std::size_t k = 0; k < a.per_class_.size(); ++k) {
      const auto& x = a.per_class_[k];
      const auto& y = b.per_class_[k];
      if (x.size() != y.size()) return false;
      for (std::size_t n = 0; n < x.size(); ++n) {
        if (x[n].count != y[n].count || x[n].center != y[n].center) return false;
      }
    }
    return true;
  }

 private:
  std::size_t capacity_ = 0;
  std::vector<std::vector<Prototype>> per_class_;
};

struct MainPrediction {
  Logits scores;
  std::size_t pseudo_class = 0;
  double entropy = 1.0;
};

inline MainPrediction predict_main(std::span<const double> feature, const ClassEmbeddings& classes,
                                   double tau) {
  MainPrediction out;
  out.scores = classes.scores(feature);
  out.pseudo_class = argmax(out.scores);
  out.entropy = norm_entropy(softmax(out.scores, tau));
  return out;
}

/// Normalized entropy of the zero-shot prediction for an arbitrary vector.
inline double prediction_entropy(std::span<const double> v, const ClassEmbeddings& classes,
                                 double tau) {
  return norm_entropy(softmax(classes.scores(v), tau));
}

/// Most similar prototype of class k; ties go to the lowest slot.
inline std::size_t select_prototype(std::span<const double> feature, const PrototypeCache& cache,
                                    std::size_t k) {
  const auto& list = cache.prototypes(k);
  if (list.empty()) {
    throw Error(Errc::EmptyClassCache, "class " + std::to_string(k) + " has no prototypes");
  }
  std::size_t best = 0;
  double best_sim = cosine_sim(feature, list[0].center);
  for (std::size_t j = 1; j < list.size(); ++j) {
    const double s = cosine_sim(feature, list[j].center);
    if (s > best_sim) {
      best_sim = s;
      best = j;
    }
  }
  return best;
}

enum class InsertPolicy {
  AlwaysFill,        ///< every sample opens a new slot while the class has room
  NearestIfSimilar,  ///< merge into the nearest center when it is similar enough
};

struct UpdateOutcome {
  enum class Kind { Inserted, Updated };
  Kind kind = Kind::Inserted;
  std::size_t class_index = 0;
  std::size_t slot = 0;

  friend bool operator==(const UpdateOutcome&, const UpdateOutcome&) = default;
};

struct PrototypeUpdateOptions {
  InsertPolicy policy = InsertPolicy::AlwaysFill;
  double merge_similarity = 0.9;  ///< only read by NearestIfSimilar
};

/// Confidence-weighted moving average of a center towards `feature`,
/// re-normalized to unit length; the sample count is incremented.
///
/// Weights are exp(-beta * H_t) for the sample and b * exp(-beta * H_center)
/// for the center. They are formed in log space and shifted by their maximum
/// so that large beta cannot underflow both to zero.
inline void merge_into(Prototype& proto, std::span<const double> feature, double sample_entropy,
                       const ClassEmbeddings& classes, double beta, double tau) {
  const double center_entropy = prediction_entropy(proto.center, classes, tau);
  const double log_w_sample = -beta * sample_entropy;
  const double log_w_center = std::log(static_cast<double>(proto.count)) - beta * center_entropy;
  const double shift = std::max(log_w_sample, log_w_center);
  const double w_sample = std::exp(log_w_sample - shift);
  const double w_center = std::exp(log_w_center - shift);
  const double denom = w_sample + w_center;
  FeatureVec moved(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    moved[i] = (w_sample * feature[i] + w_center * proto.center[i]) / denom;
  }
  proto.center = unit_normalize(moved);
  ++proto.count;
}

inline UpdateOutcome update_or_insert(PrototypeCache& cache, std::span<const double> feature,
                                      const MainPrediction& pred, const ClassEmbeddings& classes,
                                      double beta, double tau,
                                      const PrototypeUpdateOptions& options = {}) {
  const std::size_t k = pred.pseudo_class;
  if (k >= cache.classes()) {
    throw Error(Errc::InvalidLabels, "pseudo class " + std::to_string(k) + " out of range");
  }
  require_same_dim(feature.size(), classes.dim(), "feature vs class embedding dim");

  if (!cache.full(k)) {
    if (options.policy == InsertPolicy::NearestIfSimilar && cache.size(k) > 0) {
      const std::size_t n = select_prototype(feature, cache, k);
      if (cosine_sim(feature, cache.at(k, n).center) >= options.merge_similarity) {
        merge_into(cache.at(k, n), feature, pred.entropy, classes, beta, tau);
        return {UpdateOutcome::Kind::Updated, k, n};
      }
    }
    const std::size_t n = cache.insert(k, Prototype{FeatureVec(feature.begin(), feature.end()), 1});
    return {UpdateOutcome::Kind::Inserted, k, n};
  }
  const std::size_t n = select_prototype(feature, cache, k);
  merge_into(cache.at(k, n), feature, pred.entropy, classes, beta, tau);
  return {UpdateOutcome::Kind::Updated, k, n};
}

/// Stacked view of the cache in class-major, slot-minor order.
struct CacheSnapshot {
  Matrix units;                           ///< M x d prototype centers
  std::vector<std::size_t> origin_class;  ///< cache class of each row
  std::vector<std::size_t> counts;        ///< samples folded into each row
  Matrix initial_labels;                  ///< M x K softmax of zero-shot scores
};

inline CacheSnapshot snapshot(const PrototypeCache& cache, const ClassEmbeddings& classes,
                              double tau) {
  const std::size_t m = cache.total();
  if (m == 0) throw Error(Errc::EmptyCache, "snapshot of an empty prototype cache");
  CacheSnapshot out;
  out.units = Matrix(0, classes.dim());
  out.initial_labels = Matrix(0, classes.classes());
  out.origin_class.reserve(m);
  out.counts.reserve(m);
  for (std::size_t k = 0; k < cache.classes(); ++k) {
    for (const Prototype& p : cache.prototypes(k)) {
      out.units.append_row(p.center);
      out.origin_class.push_back(k);
      out.counts.push_back(p.count);
      out.initial_labels.append_row(softmax(classes.scores(p.center), tau));
    }
  }
  return out;
}

}  // namespace uniadapt
