// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

// uniadapt command-line tool: gen | run | solve-check | bench.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "uniadapt/harness.hpp"

namespace fs = std::filesystem;
using namespace uniadapt;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("uniadapt");
  logger->set_pattern("%^[%l]%$ %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  const char* env = std::getenv("UA_LOG");
  if (env == nullptr) return;
  const std::string value(env);
  if (value == "error" || value == "warn" || value == "info" || value == "debug") {
    spdlog::set_level(spdlog::level::from_str(value));
  } else {
    spdlog::warn("UA_LOG='{}' not one of error|warn|info|debug; using info", value);
  }
}

struct ConfigFlags {
  MethodOptions opts;
  std::size_t reassign_every = 1;
  bool never_reassign = false;
  std::string insert_policy = "always-fill";

  void add(CLI::App& app, bool with_method) {
    AdapterConfig& c = opts.config;
    if (with_method) {
      app.add_option("--method,--baseline", opts.method, "Adaptation method")
          ->check(CLI::IsMember(std::vector<std::string>(kMethods.begin(), kMethods.end())))
          ->capture_default_str();
    }
    app.add_option("--beta", c.beta, "Confidence decay of prototype updates")->capture_default_str();
    app.add_option("--gamma", c.gamma, "Affinity threshold")->capture_default_str();
    app.add_option("--lambda", c.lambda_reg, "Smoothing strength")->capture_default_str();
    app.add_option("--capacity", c.capacity, "Prototypes per class")->capture_default_str();
    app.add_option("--tau", c.tau, "Softmax temperature")->capture_default_str();
    app.add_option("--cg-tol", c.cg_tol, "Relative CG residual tolerance")->capture_default_str();
    app.add_option("--cg-max-iter", c.cg_max_iter, "CG iteration cap")->capture_default_str();
    app.add_option("--reassign-every", reassign_every, "Reassign prototypes every n samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--no-reassign", never_reassign, "Never reassign (cache-free fallback)");
    app.add_option("--insert-policy", insert_policy, "Prototype insertion policy")
        ->check(CLI::IsMember({"always-fill", "nearest-if-similar"}))
        ->capture_default_str();
    app.add_option("--merge-similarity", c.merge_similarity,
                   "Similarity above which nearest-if-similar merges")
        ->capture_default_str();
    app.add_flag("--persist-reassignment", c.persist_reassignment,
                 "Move prototypes to their reassigned class");
    app.add_flag("--confidence-smoothing", opts.confidence_smoothing,
                 "Graph smoothing inside the confidence-cache baseline");
  }

  MethodOptions resolve() const {
    MethodOptions out = opts;
    out.config.reassign_every = never_reassign ? kNeverReassign : reassign_every;
    out.config.insert_policy =
        insert_policy == "always-fill" ? InsertPolicy::AlwaysFill : InsertPolicy::NearestIfSimilar;
    try {
      out.config.validate();
    } catch (const Error& e) {
      throw UsageError(e.detail());
    }
    return out;
  }
};

struct SynthFlags {
  std::size_t modes = 3;
  double spread = 1.0;
  double noise = 0.5;
  double skew = 0.0;
  double shared = 0.0;

  void add(CLI::App& app) {
    app.add_option("--modes", modes, "Modes per class")->capture_default_str();
    app.add_option("--spread", spread, "Angle between class embedding and mode centers")
        ->capture_default_str();
    app.add_option("--noise", noise, "Within-mode jitter angle")->capture_default_str();
    app.add_option("--skew", skew, "Confidence skew of mode 0")->capture_default_str();
    app.add_option("--shared", shared, "Shared offset direction of a class's modes, in [0, 1)")
        ->capture_default_str();
  }

  SynthSpec spec(std::size_t n, std::uint64_t seed) const {
    SynthSpec s;
    s.modes_per_class = modes;
    s.mode_spread = spread;
    s.sample_noise = noise;
    s.confidence_skew = skew;
    s.shared_direction = shared;
    s.n_samples = n;
    s.seed = seed;
    return s;
  }
};

void emit_report(const nlohmann::json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::ofstream out = io::open_out(out_path);
  out << report.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing " + out_path);
  std::cout << out_path << '\n';
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  std::size_t k = 10;
  std::size_t d = 64;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  SynthFlags synth;
};

int cmd_gen(const GenArgs& a) {
  const ClassEmbeddings classes = gen_class_embeddings(a.k, a.d, a.seed);
  const auto records = gen_stream(classes, a.synth.spec(a.n, a.seed));
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw Error(Errc::IoError, "cannot create directory " + a.out + ": " + ec.message());
  const fs::path classes_path = fs::path(a.out) / "classes.uacl";
  const fs::path stream_path = fs::path(a.out) / "stream.uaeb";
  write_classes_file(classes_path, classes);
  write_embeddings_file(stream_path, a.d, records);
  std::cout << "wrote " << classes_path.string() << " (K=" << a.k << ", d=" << a.d << ") and "
            << stream_path.string() << " (n=" << a.n << ")\n";
  return 0;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  std::string classes;
  std::string embeddings;
  std::string out;
  std::string predictions;
  std::string save_cache;
  std::string load_cache;
  std::optional<std::uint64_t> seed;
  ConfigFlags config;
};

int cmd_run(const RunArgs& a) {
  const MethodOptions opts = a.config.resolve();
  const ClassEmbeddings classes = read_classes_file(a.classes);
  if ((!a.save_cache.empty() || !a.load_cache.empty()) && opts.method != "uni-adapter") {
    throw UsageError("--save-cache/--load-cache need --method uni-adapter");
  }

  std::ifstream file;
  std::istream* in = &std::cin;
  if (a.embeddings != "-") {
    file = io::open_in(a.embeddings);
    in = &file;
  }
  std::unique_ptr<RecordSource> source = open_records(*in);
  if (source->dim() != 0 && source->dim() != classes.dim()) {
    throw Error(Errc::DimMismatch, "class file " + a.classes + " has d=" +
                                       std::to_string(classes.dim()) + " but stream " +
                                       a.embeddings + " has d=" + std::to_string(source->dim()));
  }

  auto method = make_method(classes, opts, [](std::string_view msg) { spdlog::warn("{}", msg); });
  if (!a.load_cache.empty()) {
    std::ifstream cache_in = io::open_in(a.load_cache);
    static_cast<Adapter&>(*method).set_cache(read_cache(cache_in));
    spdlog::info("loaded cache from {}", a.load_cache);
  }

  // Predictions go to --predictions when given; an unlabeled stream without
  // it falls back to a file next to the report.
  std::ofstream pred_file;
  std::ostream* pred = nullptr;
  std::string pred_path = a.predictions;
  if (!pred_path.empty()) {
    if (pred_path == "-") {
      pred = &std::cout;
    } else {
      pred_file = io::open_out(pred_path);
      pred = &pred_file;
    }
  }
  std::ostringstream pending;
  RunSummary s = run_stream(*method, *source, classes.classes(), pred ? pred : &pending);
  if (!pred && s.n_labeled < s.n_samples) {
    pred_path = (a.out.empty() ? std::string("report") : a.out) + ".predictions.jsonl";
    std::ofstream fallback = io::open_out(pred_path);
    fallback << pending.str();
    spdlog::info("stream has unlabeled records; predictions written to {}", pred_path);
  } else if (!a.predictions.empty() && a.predictions != "-") {
    spdlog::info("predictions written to {}", pred_path);
  }

  if (!a.save_cache.empty()) {
    std::ofstream cache_out = io::open_out(a.save_cache);
    write_cache(cache_out, static_cast<Adapter&>(*method).cache(), classes.dim());
    spdlog::info("saved cache to {}", a.save_cache);
  }

  const nlohmann::json report = run_report(*method, opts, s, classes.classes(), a.seed);
  if (const auto acc = s.top1_accuracy()) {
    spdlog::info("{}: top-1 accuracy {:.2f}% over {} labeled samples", method->method(), *acc * 100.0,
                 s.n_labeled);
  } else {
    spdlog::info("{}: {} samples, no labels", method->method(), s.n_samples);
  }
  emit_report(report, a.out);
  return 0;
}

// --- solve-check ------------------------------------------------------------

struct SolveCheckArgs {
  SolveCheckOptions opts;
  std::string out;
};

int cmd_solve_check(const SolveCheckArgs& a) {
  const SolveCheckResult r = solve_check(a.opts);
  spdlog::info("m={} k={} lambda={} nnz={}: MAE {:.3e} (max {:.3e}, {:.2e}% relative)", a.opts.m,
               a.opts.k, a.opts.lambda_reg, r.nnz, r.mae, r.max_abs_error, r.relative_mae_percent);
  spdlog::info("CG {:.4f} s ({} iterations total, {} max per column), dense {:.4f} s", r.cg_sec,
               r.total_cg_iterations, r.max_cg_iterations, r.direct_sec);
  if (!r.all_converged) spdlog::warn("some CG columns hit the iteration cap");
  nlohmann::json report;
  report["report_version"] = kReportVersion;
  report["m"] = a.opts.m;
  report["k"] = a.opts.k;
  report["lambda_reg"] = a.opts.lambda_reg;
  report["gamma"] = a.opts.gamma;
  report["seed"] = a.opts.seed;
  report["nnz"] = r.nnz;
  report["mae"] = r.mae;
  report["max_abs_error"] = r.max_abs_error;
  report["relative_mae_percent"] = r.relative_mae_percent;
  report["cg_total_iterations"] = r.total_cg_iterations;
  report["cg_max_iterations"] = r.max_cg_iterations;
  report["cg_converged"] = r.all_converged;
  report["timing"] = {{"cg_sec", r.cg_sec}, {"direct_sec", r.direct_sec}};
  emit_report(report, a.out);
  return 0;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  BenchOptions opts;
  SynthFlags synth;
  ConfigFlags config;
  std::string out;
};

int cmd_bench(BenchArgs& a) {
  a.opts.method = a.config.resolve();
  a.opts.stream = a.synth.spec(a.opts.n, a.opts.seed);
  const nlohmann::json report = bench(a.opts);
  const auto& t = report["timing"];
  spdlog::info("{} samples in {:.3f} s: {:.1f} samples/sec", a.opts.n, t["elapsed_sec"].get<double>(),
               t["throughput_samples_per_sec"].get<double>());
  if (t.contains("stages")) {
    spdlog::info("stages: prototyping {:.3f} s, smoothing {:.3f} s, fusion {:.3f} s",
                 t["stages"]["prototyping_sec"].get<double>(),
                 t["stages"]["smoothing_sec"].get<double>(), t["stages"]["fusion_sec"].get<double>());
  }
  emit_report(report, a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"uniadapt: training-free test-time adaptation over embedding streams"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic class file and stream");
  gen_cmd->add_option("--k", gen.k, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "Embedding dimension")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen.synth.add(*gen_cmd);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Adapt over a stream and report accuracy");
  run_cmd->add_option("--classes", run.classes, "Class file (UACL or JSONL)")->required();
  run_cmd->add_option("--embeddings", run.embeddings, "Stream file (UAEB or JSONL), - for stdin")
      ->required();
  run_cmd->add_option("--out", run.out, "Report path (stdout when omitted)");
  run_cmd->add_option("--predictions", run.predictions, "Per-sample predictions (JSONL), - for stdout");
  run_cmd->add_option("--save-cache", run.save_cache, "Write the final prototype cache");
  run_cmd->add_option("--load-cache", run.load_cache, "Start from a saved prototype cache");
  run_cmd->add_option("--seed", run.seed, "Seed echoed into the report");
  run.config.add(*run_cmd, true);

  SolveCheckArgs sc;
  CLI::App* sc_cmd = app.add_subcommand("solve-check", "Compare CG with a dense direct solve");
  sc_cmd->add_option("--m", sc.opts.m, "Number of prototypes")
      ->check(CLI::Range(std::size_t{1}, kDirectSolveMaxDim))
      ->capture_default_str();
  sc_cmd->add_option("--k", sc.opts.k, "Number of classes")->check(CLI::PositiveNumber)->capture_default_str();
  sc_cmd->add_option("--lambda", sc.opts.lambda_reg, "Smoothing strength")->capture_default_str();
  sc_cmd->add_option("--gamma", sc.opts.gamma, "Affinity threshold")->capture_default_str();
  sc_cmd->add_option("--dim", sc.opts.dim, "Prototype dimension")->check(CLI::Range(2, 1 << 16))->capture_default_str();
  sc_cmd->add_option("--seed", sc.opts.seed, "Random seed")->capture_default_str();
  sc_cmd->add_option("--cg-tol", sc.opts.cg.tolerance, "Relative CG residual tolerance")->capture_default_str();
  sc_cmd->add_option("--cg-max-iter", sc.opts.cg.max_iterations, "CG iteration cap")->capture_default_str();
  sc_cmd->add_option("--out", sc.out, "Report path (stdout when omitted)");

  BenchArgs bn;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Measure throughput on a generated stream");
  bench_cmd->add_option("--n", bn.opts.n, "Number of samples")->capture_default_str();
  bench_cmd->add_option("--d", bn.opts.dim, "Embedding dimension")->capture_default_str();
  bench_cmd->add_option("--k", bn.opts.k, "Number of classes")->capture_default_str();
  bench_cmd->add_option("--seed", bn.opts.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", bn.out, "Report path (stdout when omitted)");
  bn.synth.add(*bench_cmd);
  bn.config.add(*bench_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (run_cmd->parsed()) return cmd_run(run);
    if (sc_cmd->parsed()) return cmd_solve_check(sc);
    if (bench_cmd->parsed()) return cmd_bench(bn);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
