#include "rna/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "rna/metrics.hpp"
#include "rna/optimizers.hpp"

namespace rna::cli {
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::WindowTooSmall:
    case ErrorKind::OrderingViolation:
      return kExitUsage;
    case ErrorKind::NumericalFailure:
    case ErrorKind::SingularSystem:
    case ErrorKind::DegenerateSum:
      return kExitNumerical;
    case ErrorKind::FormatError:
    case ErrorKind::IoError:
    case ErrorKind::DimensionMismatch:
      return kExitFormat;
  }
  return kExitUsage;
}

namespace {

std::vector<MetricsRow> metrics_rows(const RunResult& run) {
  std::vector<MetricsRow> rows;
  rows.reserve(run.vanilla.records.size());
  for (std::size_t i = 0; i < run.vanilla.records.size(); ++i) {
    const auto& v = run.vanilla.records[i];
    const auto& r = run.rna.records[i];
    rows.push_back({v.epoch, v.objective, v.grad_norm, r.objective, r.grad_norm,
                    r.lambda_used.value_or(std::numeric_limits<double>::quiet_NaN())});
  }
  return rows;
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  if (!spec.auto_eta) spec.optimizer.validate();
  spec.rna.validate();
}

RunResult execute(const ExperimentSpec& spec, const Problem& problem) {
  const VectorXd theta0 = initial_point(spec, problem.dim());
  return run_with_rna(problem, resolved_optimizer(spec, problem), spec.rna, theta0, spec.epochs,
                      {.flush_on_drop = spec.flush_on_drop});
}

void print_coefficients(std::ostream& out, const Eigen::VectorXd& c) {
  out << "coefficients =";
  for (Index i = 0; i < c.size(); ++i) out << ' ' << format_scalar(c(i));
  out << '\n';
}

}  // namespace

int cmd_run(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    validate_spec(spec);
    const auto problem = make_problem(spec);
    const RunResult run = execute(spec, *problem);
    write_metrics(spec.metrics_out, metrics_rows(run));
    if (!spec.checkpoint_out.empty()) {
      write_checkpoints(spec.checkpoint_out, IterateSequence<double>(run.rna.last_theta));
    }
    if (!spec.iterates_out.empty()) write_checkpoints(spec.iterates_out, run.vanilla.iterates());

    const auto& last = run.vanilla.records.back();
    const auto& last_rna = run.rna.records.back();
    out << "epochs = " << spec.epochs << '\n'
        << "objective = " << format_scalar(last.objective) << '\n'
        << "objective_rna = " << format_scalar(last_rna.objective) << '\n';
    if (auto fstar = problem->optimal_value()) out << "optimum = " << format_scalar(*fstar) << '\n';
    out << "metrics = " << spec.metrics_out.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "rna run: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

int cmd_accelerate(const AccelerateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RnaConfig cfg;
    cfg.window = options.k;
    cfg.lambda = options.lambda;
    cfg.lambda_grid = options.lambda_grid;
    cfg.weight_target = options.weight_target;
    cfg.validate();
    if (options.output.empty()) throw Error(ErrorKind::InvalidConfig, "an output path is required");
    if (!cfg.lambda_grid.empty() && options.score_config.empty()) {
      throw Error(ErrorKind::InvalidConfig, "a lambda grid needs --score-config to rank candidates");
    }

    const auto wanted = static_cast<std::uint64_t>(options.k) + 1;
    IterateSequence<double> seq;
    std::uint64_t available = 0;
    if (fs::is_directory(options.input)) {
      seq = read_checkpoint_dir(options.input);
      available = static_cast<std::uint64_t>(seq.size());
      seq = seq.latest(static_cast<Index>(wanted));
    } else {
      available = read_checkpoint_header(options.input).count;
      seq = read_checkpoints(options.input, wanted);
    }
    if (seq.size() < 2) {
      throw Error(ErrorKind::WindowTooSmall,
                  "need at least 2 iterates, found " + std::to_string(seq.size()));
    }
    if (available < wanted) {
      err << "warning: only " << available << " iterates available, using k = " << available - 1 << '\n';
    }

    Eigen::VectorXd theta;
    std::optional<double> lambda_used;
    std::optional<Eigen::VectorXd> weights;
    if (cfg.lambda_grid.empty()) {
      RnaResult result = accelerate(seq, cfg);
      theta = std::move(result.theta);
      lambda_used = result.coefficients.lambda_used;
      weights = std::move(result.coefficients.weights);
    } else {
      const ExperimentSpec scoring = load_config(options.score_config);
      const auto problem = make_problem(scoring);
      if (problem->dim() != seq.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "score problem dimension " + std::to_string(problem->dim()) +
                                                      " does not match checkpoints (" +
                                                      std::to_string(seq.dim()) + ")");
      }
      AdaptiveResult result = accelerate_adaptive(seq, cfg, [&](const Eigen::VectorXd& x) { return problem->value(x); });
      theta = std::move(result.theta);
      lambda_used = result.lambda;
      if (result.coefficients) weights = result.coefficients->weights;
      out << "score = " << format_scalar(result.score) << '\n';
    }

    write_checkpoints(options.output, IterateSequence<double>(theta), options.precision);
    out << "k = " << seq.size() - 1 << '\n';
    if (lambda_used) {
      out << "lambda = " << format_scalar(*lambda_used) << '\n';
      print_coefficients(out, *weights);
    } else {
      out << "lambda = none (last iterate kept)\n";
    }
    out << "output = " << options.output.string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "rna accelerate: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

std::string sweep_metrics_name(Index k, double lambda) {
  return "metrics_k" + std::to_string(k) + "_lambda" + format_exact(lambda) + ".csv";
}

int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err, std::vector<SweepCell>* cells_out) {
  std::unique_ptr<Problem> problem;
  try {
    if (options.k_list.empty() || options.lambda_list.empty()) {
      throw Error(ErrorKind::InvalidConfig, "sweep needs non-empty k and lambda lists");
    }
    validate_spec(options.spec);
    for (Index k : options.k_list) {
      if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be >= 1");
    }
    for (double l : options.lambda_list) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorKind::InvalidConfig, "lambda must be >= 0");
    }
    problem = make_problem(options.spec);
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + options.out_dir.string() + ": " + ec.message());
  } catch (const Error& e) {
    err << "rna sweep: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }

  std::vector<SweepCell> cells;
  for (Index k : options.k_list) {
    for (double lambda : options.lambda_list) {
      SweepCell cell;
      cell.k = k;
      cell.lambda = lambda;
      cell.metrics = options.out_dir / sweep_metrics_name(k, lambda);
      cells.push_back(std::move(cell));
    }
  }

  const std::optional<double> fstar = problem->optimal_value();
  auto run_cell = [&](SweepCell& cell) {
    ExperimentSpec spec = options.spec;
    spec.rna.window = cell.k;
    spec.rna.lambda = cell.lambda;
    spec.rna.lambda_grid.clear();
    try {
      const RunResult run = execute(spec, *problem);
      write_metrics(cell.metrics, metrics_rows(run));
      const auto& last = run.vanilla.records.back();
      const auto& last_rna = run.rna.records.back();
      cell.final_objective = last.objective;
      cell.final_objective_rna = last_rna.objective;
      cell.suboptimality = last.objective - fstar.value_or(0.0);
      cell.suboptimality_rna = last_rna.objective - fstar.value_or(0.0);
      cell.fallback_epochs = static_cast<std::size_t>(
          std::count_if(run.rna.records.begin(), run.rna.records.end(), [](const RnaRecord& r) { return r.fell_back(); }));
      cell.ok = !last_rna.fell_back();
      cell.message = last_rna.failure;
    } catch (const Error& e) {
      cell.ok = false;
      cell.message = e.what();
    }
  };

  unsigned workers = options.workers != 0 ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv(kSweepWorkersEnv)) {
    const long parsed = std::strtol(cap, nullptr, 10);
    if (parsed >= 1) workers = std::min(workers, static_cast<unsigned>(parsed));
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path summary = options.out_dir / "summary.csv";
  std::ofstream table(summary, std::ios::trunc);
  if (!table) {
    err << "rna sweep: cannot write " << summary.string() << '\n';
    return kExitFormat;
  }
  table << kSweepSummaryHeader << '\n';
  std::size_t succeeded = 0;
  const SweepCell* best = nullptr;
  for (const auto& c : cells) {
    std::string message = c.message;
    std::replace(message.begin(), message.end(), ',', ';');
    std::replace(message.begin(), message.end(), '\n', ' ');
    table << c.k << ',' << format_exact(c.lambda) << ',' << (c.ok ? "ok" : "failed") << ','
          << format_scalar(c.final_objective) << ',' << format_scalar(c.final_objective_rna) << ','
          << format_scalar(c.suboptimality) << ',' << format_scalar(c.suboptimality_rna) << ','
          << c.fallback_epochs << ',' << c.metrics.filename().string() << ',' << message << '\n';
    if (c.ok) {
      ++succeeded;
      if (best == nullptr || c.suboptimality_rna < best->suboptimality_rna) best = &c;
    }
  }
  out << "cells = " << cells.size() << '\n' << "succeeded = " << succeeded << '\n';
  if (best != nullptr) {
    out << "best_k = " << best->k << '\n'
        << "best_lambda = " << format_exact(best->lambda) << '\n'
        << "best_suboptimality_rna = " << format_scalar(best->suboptimality_rna) << '\n';
  }
  out << "summary = " << summary.string() << '\n';
  if (cells_out != nullptr) *cells_out = cells;
  return succeeded > 0 ? kExitOk : kExitNumerical;
}

// ------------------------------------------------------------------ argv

namespace {

// Experiment flags are collected as text and applied through the same
// key/value parser as configuration files, after the file itself.
struct ExperimentFlags {
  std::string config;
  struct Bound {
    std::string flag;
    std::string key;
    const std::string* value;
  };
  std::vector<Bound> bound;
  bool flush_on_drop = false;
  std::vector<std::unique_ptr<std::string>> storage;

  void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    app.add_option(flag, *storage.back(), help);
    bound.push_back({flag, key, storage.back().get()});
  }

  void attach(CLI::App& app) {
    app.add_option("--config", config, "Key = value experiment configuration file");
    add(app, "--problem", "problem", "quadratic | logistic | mlp");
    add(app, "--dim", "dim", "Parameter (mlp: input) dimension");
    add(app, "--condition", "condition", "Quadratic condition number");
    add(app, "--samples", "samples", "Sample count (logistic, mlp)");
    add(app, "--l2", "l2", "Logistic ridge weight");
    add(app, "--hidden", "hidden", "MLP hidden units");
    add(app, "--seed", "seed", "Random seed");
    add(app, "--init-scale", "init_scale", "Scale of the Gaussian start point");
    add(app, "--epochs", "epochs", "Number of epochs");
    add(app, "--eta", "eta", "Step size or 'auto'");
    add(app, "--momentum", "momentum", "Heavy-ball momentum");
    add(app, "--weight-decay", "weight_decay", "L2 weight decay");
    add(app, "--schedule", "schedule", "Step drops, e.g. 150:0.1,250:0.1");
    add(app, "--batch-size", "batch_size", "'full' or mini-batch size");
    add(app, "--k", "k", "Window size K (default 10)");
    add(app, "--lambda", "lambda", "Regularization (default 1e-8)");
    add(app, "--lambda-grid", "lambda_grid", "Comma list of lambdas for adaptive selection");
    add(app, "--weight-target", "weight_target", "latest | oldest");
    add(app, "--out", "metrics_out", "Metrics CSV path");
    add(app, "--checkpoint-out", "checkpoint_out", "Write the final extrapolated point here");
    add(app, "--iterates-out", "iterates_out", "Write the optimizer iterates here");
    app.add_flag("--flush-on-drop", flush_on_drop, "Restart the window at learning-rate drops");
  }

  ExperimentSpec build(const CLI::App& app) const {
    ExperimentSpec spec;
    if (!config.empty()) spec = load_config(config);
    for (const auto& b : bound) {
      if (app.count(b.flag) > 0) apply_setting(spec, b.key, *b.value);
    }
    if (flush_on_drop) spec.flush_on_drop = true;
    return spec;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regularized nonlinear acceleration of optimizer iterates", "rna"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an optimizer with per-epoch extrapolation and write metrics");
  ExperimentFlags run_flags;
  run_flags.attach(*run);
  bool dump_config = false;
  run->add_flag("--dump-config", dump_config, "Print the effective configuration and exit");

  auto* accelerate = app.add_subcommand("accelerate", "Extrapolate a stored checkpoint sequence");
  AccelerateOptions acc;
  std::string acc_grid;
  std::string acc_target = "latest";
  std::string acc_precision = "f64";
  accelerate->add_option("input", acc.input, "Checkpoint file or directory")->required();
  accelerate->add_option("--k", acc.k, "Window size K")->capture_default_str();
  accelerate->add_option("--lambda", acc.lambda, "Regularization")->capture_default_str();
  accelerate->add_option("--lambda-grid", acc_grid, "Comma list of lambdas (needs --score-config)");
  accelerate->add_option("--score-config", acc.score_config, "Experiment config defining the objective");
  accelerate->add_option("--weight-target", acc_target, "latest | oldest")->capture_default_str();
  accelerate->add_option("--precision", acc_precision, "Output precision f64 | f32")->capture_default_str();
  accelerate->add_option("--out", acc.output, "Output checkpoint path")->required();

  auto* sweep = app.add_subcommand("sweep", "Grid over (K, lambda), one metrics file per cell");
  ExperimentFlags sweep_flags;
  sweep_flags.attach(*sweep);
  std::string k_list = std::to_string(kDefaultWindow);
  std::string lambda_list = format_exact(kDefaultLambda);
  std::string sweep_dir = "sweep";
  sweep->add_option("--k-list", k_list, "Comma list of window sizes")->capture_default_str();
  sweep->add_option("--lambda-list", lambda_list, "Comma list of lambdas")->capture_default_str();
  sweep->add_option("--out-dir", sweep_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ? app.help() : e.what()) << '\n';
      return kExitOk;
    }
    err << "rna: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (run->parsed()) {
      const ExperimentSpec spec = run_flags.build(*run);
      if (dump_config) {
        out << to_config_text(spec);
        return kExitOk;
      }
      return cmd_run(spec, out, err);
    }
    if (accelerate->parsed()) {
      if (!acc_grid.empty()) acc.lambda_grid = parse_double_list(acc_grid);
      if (acc_target == "latest") acc.weight_target = WeightTarget::LatestK;
      else if (acc_target == "oldest") acc.weight_target = WeightTarget::OldestK;
      else throw Error(ErrorKind::InvalidConfig, "weight target must be latest or oldest");
      if (acc_precision == "f64") acc.precision = Precision::F64;
      else if (acc_precision == "f32") acc.precision = Precision::F32;
      else throw Error(ErrorKind::InvalidConfig, "precision must be f64 or f32");
      return cmd_accelerate(acc, out, err);
    }
    SweepOptions options;
    options.spec = sweep_flags.build(*sweep);
    for (double k : parse_double_list(k_list)) {
      if (k != std::floor(k)) throw Error(ErrorKind::InvalidConfig, "k values must be integers");
      options.k_list.push_back(static_cast<Index>(k));
    }
    options.lambda_list = parse_double_list(lambda_list);
    options.out_dir = sweep_dir;
    return cmd_sweep(options, out, err);
  } catch (const Error& e) {
    err << "rna: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

}  // namespace rna::cli
