// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uniadapt/reassign.hpp"

using namespace uniadapt;
using Catch::Matchers::WithinAbs;

namespace {

Matrix rows(std::initializer_list<FeatureVec> list) {
  Matrix m(0, list.begin()->size());
  for (const auto& r : list) m.append_row(r);
  return m;
}

}  // namespace

TEST_CASE("smoothing with lambda zero is the identity") {
  const auto p = oracle::clustered_problem(40, 5, 8, 3);
  const Matrix z0 = oracle::to_matrix(p.labels);
  const SolveResult r = smooth_labels(oracle::to_matrix(p.units), z0, {0.5, 0.0, {}});
  CHECK(r.solution == z0);
  CHECK(harden(r.solution).assignment == harden(z0).assignment);
}

TEST_CASE("two identical prototypes give the hand-computed labels") {
  const Matrix z0 = rows({{1, 0}, {0, 1}});
  const SolveResult r = smooth_labels(rows({{0, 1, 0}, {0, 1, 0}}), z0, {0.5, 0.3, {}});
  const double want[2][2] = {{0.884615, 0.115385}, {0.115385, 0.884615}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK_THAT(r.solution(i, j), WithinAbs(want[i][j], 1e-6));
  CHECK(harden(r.solution).assignment == std::vector<std::size_t>{0, 1});
}

TEST_CASE("prototypes without edges keep their labels") {
  const Matrix z0 = rows({{0.2, 0.8}, {0.7, 0.3}, {0.5, 0.5}});
  const Matrix u = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  for (double lambda : {0.1, 1.0, 100.0}) {
    const SolveResult r = smooth_labels(u, z0, {0.5, lambda, {}});
    CHECK(r.solution == z0);
  }
  std::mt19937_64 rng(1);
  Matrix spread(0, 64);
  for (int i = 0; i < 30; ++i) spread.append_row(oracle::random_unit(64, rng));
  Matrix labels(0, 3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 30; ++i) labels.append_row(FeatureVec{u01(rng), u01(rng), u01(rng)});
  const SolveResult r = smooth_labels(spread, labels, {0.9, 5.0, {}});
  CHECK(harden(r.solution).assignment == harden(labels).assignment);
}

TEST_CASE("smoothing conserves column mass on a complete graph") {
  Matrix u(0, 4);
  for (int i = 0; i < 7; ++i) u.append_row(FeatureVec{0, 0, 1, 0});
  const auto p = oracle::clustered_problem(7, 3, 4, 5);
  const Matrix z0 = oracle::to_matrix(p.labels);
  const SolveResult r = smooth_labels(u, z0, {0.5, 0.7, {1e-10, 100}});
  for (std::size_t c = 0; c < 3; ++c) {
    double before = 0, after = 0;
    for (std::size_t i = 0; i < 7; ++i) {
      before += z0(i, c);
      after += r.solution(i, c);
    }
    CHECK_THAT(after, WithinAbs(before, 1e-6));
  }
}

TEST_CASE("smoothing matches the dense oracle") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto p = oracle::clustered_problem(20 + 15 * seed, 4, 12, seed);
    const double lambda = 0.1 + 0.2 * static_cast<double>(seed % 5);
    const SolveResult r =
        smooth_labels(oracle::to_matrix(p.units), oracle::to_matrix(p.labels), {0.5, lambda, {}});
    const auto want =
        oracle::solve_shifted(oracle::laplacian(oracle::affinity(p.units, 0.5)), lambda, p.labels);
    CHECK(oracle::mae(r.solution, want) <= 1e-6);
  }
}

TEST_CASE("smoothing repairs a planted mislabel") {
  std::mt19937_64 rng(2024);
  const auto a = oracle::random_unit(16, rng);
  const auto b = oracle::random_unit(16, rng);
  oracle::Dense units, labels;
  for (int i = 0; i < 10; ++i) {
    units.push_back(oracle::tilt(a, 0.05, rng));
    labels.push_back({0.9, 0.1});
  }
  for (int i = 0; i < 10; ++i) {
    units.push_back(oracle::tilt(b, 0.05, rng));
    labels.push_back({0.1, 0.9});
  }
  labels[3] = {0.45, 0.55};

  const auto want =
      oracle::solve_shifted(oracle::laplacian(oracle::affinity(units, 0.5)), 0.3, labels);
  REQUIRE(want[3][0] > want[3][1]);

  const SolveResult r = smooth_labels(oracle::to_matrix(units), oracle::to_matrix(labels), {0.5, 0.3, {}});
  const HardLabels hard = harden(r.solution);
  CHECK(hard.assignment[3] == 0);
  std::vector<std::size_t> origin(20, 0);
  for (int i = 10; i < 20; ++i) origin[i] = 1;
  origin[3] = 1;
  CHECK(reassignment_flips(hard, origin) == 1);
}

TEST_CASE("hardening keeps the row maximum") {
  HardLabels h = harden(rows({{0.9, 0.1}, {0.5, 0.5}, {0.1, 0.2}}));
  CHECK(h.assignment == std::vector<std::size_t>{0, 0, 1});
  CHECK(h.onehot == rows({{1, 0}, {1, 0}, {0, 1}}));
  Matrix bad = rows({{0.9, 0.1}});
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(throws_code(Errc::InvalidLabels, [&] { harden(bad); }));
  CHECK(throws_code(Errc::InvalidLabels, [] { harden(Matrix(0, 2)); }));
}

TEST_CASE("reassignment flips count mismatches") {
  const HardLabels h = harden(rows({{1, 0}, {0, 1}, {1, 0}}));
  CHECK(reassignment_flips(h, std::vector<std::size_t>{0, 1, 0}) == 0);
  CHECK(reassignment_flips(h, std::vector<std::size_t>{0, 1, 1}) == 1);
  const HardLabels five = harden(rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}}));
  CHECK(reassignment_flips(five, std::vector<std::size_t>{1, 1, 1, 1, 1}) == 5);
  CHECK(throws_code(Errc::DimMismatch, [&] { reassignment_flips(h, std::vector<std::size_t>{0, 1}); }));
}
