// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scalar and vector primitives shared by every stage of the engine:
// cosine similarity, temperature softmax, log(K)-normalized entropy and
// unit normalization. All sums are accumulated in double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uniadapt/error.hpp"

namespace uniadapt {

using FeatureVec = std::vector<double>;
using Logits = std::vector<double>;

/// Tolerance on ||v||_2 - 1 under which a vector counts as unit-norm.
inline constexpr double kUnitNormTol = 1e-6;

/// Dense row-major matrix. Rows are exposed as spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw Error(Errc::DimMismatch, "row of length " + std::to_string(values.size()) +
                                         " appended to matrix with " + std::to_string(cols_) +
                                         " columns");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline bool is_unit(std::span<const double> v, double tol = kUnitNormTol) {
  return std::abs(l2_norm(v) - 1.0) <= tol;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(Errc::DimMismatch, std::string(what) + ": " + std::to_string(a) + " vs " +
                                       std::to_string(b));
  }
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "cosine_sim");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroNorm, "cosine_sim of a zero vector");
  return dot(a, b) / (na * nb);
}

/// softmax(s / tau) with max subtraction.
inline std::vector<double> softmax(std::span<const double> s, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidTemperature, "tau must be > 0");
  std::vector<double> out(s.size());
  if (s.empty()) return out;
  const double hi = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp((s[i] - hi) / tau);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

/// Probabilities below this contribute nothing to the entropy sum.
inline constexpr double kEntropyFloor = 1e-300;

/// Shannon entropy divided by ln K, clamped to [0, 1].
inline double norm_entropy(std::span<const double> p) {
  if (p.size() < 2) {
    throw Error(Errc::DegenerateClassCount,
                "normalized entropy needs K >= 2, got " + std::to_string(p.size()));
  }
  double h = 0.0;
  for (double x : p) {
    if (x > kEntropyFloor) h -= x * std::log(x);
  }
  return std::clamp(h / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

inline FeatureVec unit_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n >= 1e-12)) throw Error(Errc::ZeroNorm, "cannot normalize a (near-)zero vector");
  FeatureVec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace uniadapt
