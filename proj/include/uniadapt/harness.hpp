// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Evaluation plumbing behind the command-line tool: method selection, stream
// runs with accuracy reports, the CG-vs-dense accuracy check and the
// throughput benchmark. Reports are JSON documents with "report_version": 1;
// everything that depends on wall-clock time lives under "timing".

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uniadapt/adapter.hpp"
#include "uniadapt/baselines.hpp"
#include "uniadapt/direct_solve.hpp"
#include "uniadapt/streams.hpp"
#include "uniadapt/synth.hpp"

namespace uniadapt {

inline constexpr int kReportVersion = 1;
inline constexpr std::array<std::string_view, 3> kMethods{"uni-adapter", "confidence-cache",
                                                          "zero-shot"};

struct MethodOptions {
  std::string method = "uni-adapter";
  AdapterConfig config;
  bool confidence_smoothing = false;  ///< graph smoothing inside the confidence baseline
};

inline bool is_known_method(std::string_view name) {
  return std::find(kMethods.begin(), kMethods.end(), name) != kMethods.end();
}

inline std::unique_ptr<StreamClassifier> make_method(const ClassEmbeddings& classes,
                                                     const MethodOptions& opts,
                                                     const WarningHandler& warn = {}) {
  if (opts.method == "uni-adapter") {
    auto a = std::make_unique<Adapter>(classes, opts.config);
    a->set_warning_handler(warn);
    return a;
  }
  if (opts.method == "confidence-cache") {
    opts.config.validate();
    ConfidenceCacheConfig cc{opts.config.capacity, opts.config.tau, opts.confidence_smoothing,
                             opts.config.smoothing()};
    auto c = std::make_unique<ConfidenceCache>(classes, cc);
    c->set_warning_handler(warn);
    return c;
  }
  if (opts.method == "zero-shot") {
    auto z = std::make_unique<ZeroShot>(classes, opts.config.tau);
    z->set_warning_handler(warn);
    return z;
  }
  throw Error(Errc::InvalidConfig, "unknown method '" + opts.method + "'");
}

inline const char* to_string(InsertPolicy p) {
  return p == InsertPolicy::AlwaysFill ? "always-fill" : "nearest-if-similar";
}

inline nlohmann::json config_json(const MethodOptions& opts) {
  const AdapterConfig& c = opts.config;
  nlohmann::json j;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["lambda_reg"] = c.lambda_reg;
  j["capacity_N"] = c.capacity;
  j["tau"] = c.tau;
  j["cg_tol"] = c.cg_tol;
  j["cg_max_iter"] = c.cg_max_iter;
  j["reassign_every"] = c.reassign_every == kNeverReassign ? nlohmann::json("never")
                                                           : nlohmann::json(c.reassign_every);
  j["insert_policy"] = to_string(c.insert_policy);
  j["merge_similarity"] = c.merge_similarity;
  j["persist_reassignment"] = c.persist_reassignment;
  j["confidence_smoothing"] = opts.confidence_smoothing;
  return j;
}

struct RunSummary {
  std::size_t n_samples = 0;
  std::size_t n_labeled = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> class_total;
  std::vector<std::size_t> class_correct;
  std::size_t total_flips = 0;
  double elapsed_sec = 0.0;

  std::optional<double> top1_accuracy() const {
    if (n_labeled == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(n_labeled);
  }
};

inline nlohmann::json prediction_json(std::size_t index, const SamplePrediction& p) {
  return {{"index", index},           {"final_class", p.final_class}, {"used_cache", p.used_cache},
          {"h_main", p.h_main},       {"h_cache", p.h_cache},         {"s_final", p.s_final}};
}

/// Streams every record through `method` in order. Per-sample predictions
/// are written as JSONL to `predictions` when given.
inline RunSummary run_stream(StreamClassifier& method, RecordSource& source,
                             std::size_t num_classes, std::ostream* predictions = nullptr) {
  RunSummary s;
  s.class_total.assign(num_classes, 0);
  s.class_correct.assign(num_classes, 0);
  const auto start = std::chrono::steady_clock::now();
  while (auto rec = source.next()) {
    const SamplePrediction p = method.process(rec->feature);
    if (rec->label) {
      if (*rec->label >= num_classes) {
        throw Error(Errc::FormatError, "record " + std::to_string(s.n_samples) + " has label " +
                                           std::to_string(*rec->label) + " outside [0, " +
                                           std::to_string(num_classes) + ")");
      }
      ++s.n_labeled;
      ++s.class_total[*rec->label];
      if (p.final_class == *rec->label) {
        ++s.correct;
        ++s.class_correct[*rec->label];
      }
    }
    s.total_flips += p.flips;
    if (predictions) *predictions << prediction_json(s.n_samples, p).dump() << '\n';
    ++s.n_samples;
  }
  s.elapsed_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

inline nlohmann::json stage_json(const StageTimes& t) {
  return {{"prototyping_sec", t.prototyping}, {"smoothing_sec", t.smoothing}, {"fusion_sec", t.fusion}};
}

/// Final per-class cache occupancy of a method (empty for zero-shot).
inline std::vector<std::size_t> cache_occupancy(const StreamClassifier& method, std::size_t k) {
  std::vector<std::size_t> sizes;
  if (const auto* a = dynamic_cast<const Adapter*>(&method)) {
    for (std::size_t c = 0; c < k; ++c) sizes.push_back(a->cache().size(c));
  } else if (const auto* cc = dynamic_cast<const ConfidenceCache*>(&method)) {
    for (std::size_t c = 0; c < k; ++c) sizes.push_back(cc->entries(c).size());
  }
  return sizes;
}

inline nlohmann::json run_report(const StreamClassifier& method, const MethodOptions& opts,
                                 const RunSummary& s, std::size_t num_classes,
                                 std::optional<std::uint64_t> seed = std::nullopt) {
  nlohmann::json j;
  j["report_version"] = kReportVersion;
  j["method"] = std::string(method.method());
  j["n_samples"] = s.n_samples;
  j["n_labeled"] = s.n_labeled;
  j["n_correct"] = s.correct;
  const auto acc = s.top1_accuracy();
  j["top1_accuracy"] = acc ? nlohmann::json(*acc) : nlohmann::json(nullptr);
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < num_classes; ++c) {
    per_class.push_back(s.class_total[c] == 0
                            ? nlohmann::json(nullptr)
                            : nlohmann::json(static_cast<double>(s.class_correct[c]) /
                                             static_cast<double>(s.class_total[c])));
  }
  j["per_class_accuracy"] = per_class;
  j["config"] = config_json(opts);
  const auto occupancy = cache_occupancy(method, num_classes);
  std::size_t total = 0;
  for (std::size_t n : occupancy) total += n;
  j["cache_stats"] = {{"entries_per_class", occupancy},
                      {"total_entries", total},
                      {"total_reassignment_flips", s.total_flips}};
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);

  nlohmann::json timing;
  timing["elapsed_sec"] = s.elapsed_sec;
  timing["throughput_samples_per_sec"] =
      s.elapsed_sec > 0.0 ? static_cast<double>(s.n_samples) / s.elapsed_sec : 0.0;
  if (const auto* a = dynamic_cast<const Adapter*>(&method)) {
    timing["stages"] = stage_json(a->stage_times());
  }
  j["timing"] = timing;
  return j;
}

/// Copy of a report without wall-clock dependent fields.
inline nlohmann::json strip_timing(nlohmann::json report) {
  report.erase("timing");
  return report;
}

// ---------------------------------------------------------------------------
// CG vs dense solve

struct SolveCheckOptions {
  std::size_t m = 100;
  std::size_t k = 10;
  double lambda_reg = 0.3;
  double gamma = 0.5;
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  CgOptions cg;
};

struct SolveCheckResult {
  double mae = 0.0;
  double max_abs_error = 0.0;
  double relative_mae_percent = 0.0;  ///< MAE / mean |Z_direct| * 100
  double cg_sec = 0.0;
  double direct_sec = 0.0;
  std::size_t nnz = 0;
  std::size_t total_cg_iterations = 0;
  std::size_t max_cg_iterations = 0;
  bool all_converged = true;
};

struct RandomGraphProblem {
  Matrix units;
  Matrix initial_labels;
};

/// Unit rows grouped into tight random clusters (so the thresholded graph
/// has edges) and row-stochastic soft labels from random logits.
inline RandomGraphProblem random_graph_problem(std::size_t m, std::size_t k, std::size_t dim,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t clusters = std::max<std::size_t>(1, (m + 9) / 10);
  Matrix centers(0, dim);
  for (std::size_t c = 0; c < clusters; ++c) centers.append_row(detail::random_unit(dim, rng));
  std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
  std::uniform_real_distribution<double> angle(0.0, 1.0);
  std::normal_distribution<double> logit(0.0, 2.0);
  RandomGraphProblem p{Matrix(0, dim), Matrix(0, k)};
  for (std::size_t i = 0; i < m; ++i) {
    const auto center = centers.row(pick(rng));
    p.units.append_row(
        detail::rotate_towards(center, detail::random_orthogonal(center, rng), angle(rng)));
    std::vector<double> s(k);
    for (double& x : s) x = logit(rng);
    p.initial_labels.append_row(softmax(s, 1.0));
  }
  return p;
}

inline SolveCheckResult solve_check(const SolveCheckOptions& opts) {
  if (opts.m > kDirectSolveMaxDim) throw Error(Errc::InvalidConfig, "solve-check needs m <= 2000");
  const RandomGraphProblem p = random_graph_problem(opts.m, opts.k, opts.dim, opts.seed);
  const SparseSym laplacian = normalized_laplacian(build_affinity(p.units, opts.gamma));

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const SolveResult cg = cg_solve(laplacian, opts.lambda_reg, p.initial_labels, opts.cg);
  const auto t1 = Clock::now();
  const Matrix direct = direct_solve_oracle(laplacian.to_dense(), opts.lambda_reg, p.initial_labels);
  const auto t2 = Clock::now();

  SolveCheckResult r;
  double abs_sum = 0.0;
  double ref_sum = 0.0;
  for (std::size_t i = 0; i < direct.data().size(); ++i) {
    const double e = std::abs(cg.solution.data()[i] - direct.data()[i]);
    abs_sum += e;
    ref_sum += std::abs(direct.data()[i]);
    r.max_abs_error = std::max(r.max_abs_error, e);
  }
  const double n = static_cast<double>(direct.data().size());
  r.mae = n > 0 ? abs_sum / n : 0.0;
  r.relative_mae_percent = ref_sum > 0 ? 100.0 * abs_sum / ref_sum : 0.0;
  r.cg_sec = std::chrono::duration<double>(t1 - t0).count();
  r.direct_sec = std::chrono::duration<double>(t2 - t1).count();
  r.nnz = laplacian.nnz();
  r.total_cg_iterations = cg.report.total_iterations();
  for (std::size_t it : cg.report.iterations_per_column) {
    r.max_cg_iterations = std::max(r.max_cg_iterations, it);
  }
  r.all_converged = cg.report.all_converged();
  return r;
}

// ---------------------------------------------------------------------------
// Throughput benchmark

struct BenchOptions {
  std::size_t n = 1000;
  std::size_t dim = 64;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  SynthSpec stream;  ///< n_samples and seed are taken from the fields above
  MethodOptions method;
};

inline nlohmann::json bench(const BenchOptions& opts) {
  const ClassEmbeddings classes = gen_class_embeddings(opts.k, opts.dim, opts.seed);
  SynthSpec spec = opts.stream;
  spec.n_samples = opts.n;
  spec.seed = opts.seed;
  const std::vector<StreamRecord> records = gen_stream(classes, spec);

  auto method = make_method(classes, opts.method);
  struct VectorSource final : RecordSource {
    const std::vector<StreamRecord>& recs;
    std::size_t dim_;
    std::size_t pos = 0;
    VectorSource(const std::vector<StreamRecord>& r, std::size_t d) : recs(r), dim_(d) {}
    std::optional<StreamRecord> next() override {
      if (pos == recs.size()) return std::nullopt;
      return recs[pos++];
    }
    std::size_t dim() const override { return dim_; }
  } source(records, opts.dim);

  const RunSummary s = run_stream(*method, source, opts.k);
  nlohmann::json report = run_report(*method, opts.method, s, opts.k, opts.seed);
  report["bench"] = {{"n", opts.n}, {"d", opts.dim}, {"k", opts.k}};
  return report;
}

}  // namespace uniadapt
