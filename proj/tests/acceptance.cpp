// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

#include "uniadapt/harness.hpp"

using namespace uniadapt;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Matrix rows2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

void cg_grid() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::uint64_t seed = 100;
  for (std::size_t m : {10, 50, 200}) {
    for (std::size_t k : {5, 40}) {
      for (double lambda : {0.1, 0.3, 1.0}) {
        const RandomGraphProblem p = random_graph_problem(m, k, 64, seed++);
        const SparseSym l = normalized_laplacian(build_affinity(p.units, 0.5));
        const SolveResult cg = cg_solve(l, lambda, p.initial_labels, {});
        const Matrix direct = direct_solve_oracle(l.to_dense(), lambda, p.initial_labels);
        double sum = 0.0;
        for (std::size_t i = 0; i < direct.data().size(); ++i) {
          sum += std::abs(cg.solution.data()[i] - direct.data()[i]);
        }
        worst = std::max(worst, sum / static_cast<double>(direct.data().size()));
      }
    }
  }
  const double sec = seconds_since(start);
  verdict(1, worst <= 1e-6 && sec < 10.0,
          fmt("CG vs direct solve, 18 graphs, worst MAE %.3g, %.2f s", worst, sec));
}

void hand_fixture() {
  Matrix u(0, 3);
  u.append_row(FeatureVec{0, 1, 0});
  u.append_row(FeatureVec{0, 1, 0});
  const SolveResult r = smooth_labels(u, rows2(1, 0, 0, 1), {0.5, 0.3, {}});
  const Matrix want = rows2(0.884615, 0.115385, 0.115385, 0.884615);
  double err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(r.solution.data()[i] - want.data()[i]));
  verdict(2, err <= 1e-6, fmt("2x2 identical-prototype fixture, max error %.3g", err));
}

void lambda_zero() {
  const RandomGraphProblem p = random_graph_problem(120, 8, 32, 9);
  const SolveResult r = smooth_labels(p.units, p.initial_labels, {0.5, 0.0, {}});
  const bool exact = r.solution == p.initial_labels;
  verdict(3, exact && r.report.total_iterations() == 0,
          std::string("lambda = 0 returns the initial labels ") + (exact ? "bit-exactly" : "with differences") +
              ", " + std::to_string(r.report.total_iterations()) + " CG iterations");
}

void capacity_fuzz() {
  const ClassEmbeddings w = gen_class_embeddings(10, 32, 4);
  PrototypeCache cache(10, 30);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::size_t max_fill = 0;
  double worst_norm = 0.0;
  for (int t = 0; t < 100000; ++t) {
    FeatureVec f(32);
    for (double& x : f) x = g(rng);
    f = unit_normalize(f);
    const MainPrediction p = predict_main(f, w, 1.0);
    update_or_insert(cache, f, p, w, 10.0, 1.0);
  }
  for (std::size_t k = 0; k < 10; ++k) {
    max_fill = std::max(max_fill, cache.size(k));
    for (const Prototype& proto : cache.prototypes(k)) {
      worst_norm = std::max(worst_norm, std::abs(l2_norm(proto.center) - 1.0));
    }
  }
  verdict(4, max_fill <= 30 && worst_norm <= 1e-6,
          fmt("100000-sample fuzz, max N_k %.0f, worst |norm - 1| %.3g", static_cast<double>(max_fill),
              worst_norm));
}

// Benchmark used by criterion 5. The shared-direction, spread and noise values
// were fixed while constructing the benchmark and are not tuned per seed.
constexpr double kBenchSpread = 1.3;
constexpr double kBenchNoise = 0.7;
constexpr double kBenchShared = 0.4;

double accuracy(const ClassEmbeddings& w, const std::vector<StreamRecord>& records,
                const std::string& method) {
  MethodOptions o;
  o.method = method;
  auto m = make_method(w, o);
  std::size_t correct = 0;
  for (const auto& r : records) correct += m->process(r.feature).final_class == *r.label;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

void ablation() {
  bool ok = true;
  std::string detail = "K=20 d=128 3 modes skew 4 n=10000;";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ClassEmbeddings w = gen_class_embeddings(20, 128, seed);
    SynthSpec spec;
    spec.modes_per_class = 3;
    spec.mode_spread = kBenchSpread;
    spec.sample_noise = kBenchNoise;
    spec.shared_direction = kBenchShared;
    spec.confidence_skew = 4;
    spec.n_samples = 10000;
    spec.seed = seed;
    const auto records = gen_stream(w, spec);
    const double uni = accuracy(w, records, "uni-adapter");
    const double conf = accuracy(w, records, "confidence-cache");
    const double zs = accuracy(w, records, "zero-shot");
    const bool seed_ok = uni - conf >= 0.03 && uni > zs && conf > zs;
    ok = ok && seed_ok;
    detail += fmt(" seed %.0f: uni %.4f conf %.4f zs %.4f;", static_cast<double>(seed), uni, conf, zs);
  }
  verdict(5, ok, detail);
}

void fusion_examples() {
  const FusionResult equal = entropy_fuse(Logits{1, 0}, Logits{0, 1}, 1.0);
  const bool a = equal.fused == Logits{0.5, 0.5};
  const Logits main{1, 0, 0};
  const FusionResult confident = entropy_fuse(main, Logits{0.2, 0.2, 0.2}, 1e-3);
  const bool b = confident.weights.h_main == 0.0 && confident.fused == main;
  const Logits w = fuse_logits(Logits{1, 0}, Logits{0, 1}, FusionWeights{0.8, 0.4});
  const bool c = std::abs(w[0] - 1.0 / 3.0) <= 1e-9 && std::abs(w[1] - 2.0 / 3.0) <= 1e-9;
  verdict(6, a && b && c,
          std::string("equal-entropy mean ") + (a ? "ok" : "wrong") + ", confident passthrough " +
              (b ? "ok" : "wrong") + ", 0.8/0.4 weighting " + (c ? "ok" : "wrong"));
}

void duplication() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    Matrix units(0, 16), dup(0, 16);
    std::vector<std::size_t> assign, dup_assign;
    for (std::size_t m = 0; m < 20; ++m) {
      units.append_row(detail::random_unit(16, rng));
      assign.push_back(m % 5);
    }
    dup = units;
    dup_assign = assign;
    for (int rep = 1; rep < 5; ++rep) {
      for (std::size_t m = 0; m < 20; ++m) {
        if (assign[m] == 2) {
          dup.append_row(units.row(m));
          dup_assign.push_back(2);
        }
      }
    }
    auto hard = [](const std::vector<std::size_t>& a) {
      Matrix onehot(0, 5);
      for (std::size_t c : a) {
        FeatureVec row(5, 0.0);
        row[c] = 1.0;
        onehot.append_row(row);
      }
      return harden(onehot);
    };
    const HardLabels ha = hard(assign), hb = hard(dup_assign);
    const FeatureVec f = detail::random_unit(16, rng);
    const Logits sa = cache_logits(units, ha, class_normalizer(ha), f);
    const Logits sb = cache_logits(dup, hb, class_normalizer(hb), f);
    for (std::size_t c = 0; c < 5; ++c) worst = std::max(worst, std::abs(sa[c] - sb[c]));
  }
  verdict(7, worst <= 1e-9, fmt("5x duplication on 100 instances, worst change %.3g", worst));
}

std::string report_of(const ClassEmbeddings& w, const std::string& stream_bytes) {
  std::istringstream in(stream_bytes, std::ios::binary);
  auto source = open_records(in);
  MethodOptions o;
  auto method = make_method(w, o);
  const RunSummary s = run_stream(*method, *source, w.classes());
  return strip_timing(run_report(*method, o, s, w.classes(), 8)).dump(2);
}

void determinism() {
  const ClassEmbeddings w = gen_class_embeddings(10, 64, 8);
  SynthSpec spec;
  spec.n_samples = 1500;
  spec.seed = 8;
  spec.confidence_skew = 2;
  const auto records = gen_stream(w, spec);
  std::ostringstream bytes(std::ios::binary);
  write_embeddings(bytes, 64, records);
  const bool same_report = report_of(w, bytes.str()) == report_of(w, bytes.str());

  Adapter used(w, {});
  for (std::size_t i = 0; i < 700; ++i) used.process(records[i].feature);
  used.reset();
  Adapter fresh(w, {});
  bool same_replay = true;
  for (const auto& r : records) {
    const SamplePrediction a = used.process(r.feature);
    const SamplePrediction b = fresh.process(r.feature);
    same_replay = same_replay && a.s_final == b.s_final && a.final_class == b.final_class;
  }
  same_replay = same_replay && used.cache() == fresh.cache();
  verdict(8, same_report && same_replay,
          std::string("repeat runs ") + (same_report ? "identical" : "differ") + ", reset-and-replay " +
              (same_replay ? "identical" : "differs"));
}

void throughput() {
  const ClassEmbeddings w = gen_class_embeddings(40, 512, 1);
  SynthSpec spec;
  spec.n_samples = 3000;
  spec.seed = 1;
  const auto records = gen_stream(w, spec);
  Adapter a(w, {});
  std::size_t i = 0;
  for (; i < 1000; ++i) a.process(records[i].feature);
  const auto start = Clock::now();
  for (; i < records.size(); ++i) a.process(records[i].feature);
  const double rate = 2000.0 / seconds_since(start);
  verdict(9, rate >= 50.0,
          fmt("d=512 K=40 N=30 reassign every sample: %.1f samples/s over 2000 samples after warm-up, cache %.0f prototypes",
              rate, static_cast<double>(a.cache().total())));
}

}  // namespace

int main() {
  cg_grid();
  hand_fixture();
  lambda_zero();
  capacity_fuzz();
  ablation();
  fusion_examples();
  duplication();
  determinism();
  throughput();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
