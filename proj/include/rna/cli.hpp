#pragma once

// Command implementations behind the `rna` executable. They report through
// the given streams and return the process exit status:
//
//   0 success, 2 usage / window too small, 3 numerical failure,
//   4 checkpoint format or I/O failure.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rna/checkpoint_io.hpp"
#include "rna/error.hpp"
#include "rna/experiment.hpp"

namespace rna::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitNumerical = 3,
  kExitFormat = 4,
};

int exit_code_for(ErrorKind kind);

/// Environment variable capping the number of sweep workers.
inline constexpr const char* kSweepWorkersEnv = "RNA_SWEEP_WORKERS";

int cmd_run(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);

struct AccelerateOptions {
  std::filesystem::path input;
  Index k = kDefaultWindow;
  double lambda = kDefaultLambda;
  std::vector<double> lambda_grid;
  WeightTarget weight_target = WeightTarget::LatestK;
  /// Experiment configuration whose objective scores grid candidates.
  std::filesystem::path score_config;
  std::filesystem::path output;
  Precision precision = Precision::F64;
};

int cmd_accelerate(const AccelerateOptions& options, std::ostream& out, std::ostream& err);

struct SweepOptions {
  ExperimentSpec spec;
  std::vector<Index> k_list;
  std::vector<double> lambda_list;
  std::filesystem::path out_dir = "sweep";
  /// 0 = hardware concurrency, still capped by RNA_SWEEP_WORKERS.
  unsigned workers = 0;
};

struct SweepCell {
  Index k = 0;
  double lambda = 0.0;
  bool ok = false;
  double final_objective = 0.0;
  double final_objective_rna = 0.0;
  /// f - f* when the optimum is known, otherwise f.
  double suboptimality = 0.0;
  double suboptimality_rna = 0.0;
  std::size_t fallback_epochs = 0;
  std::filesystem::path metrics;
  std::string message;
};

inline constexpr const char* kSweepSummaryHeader =
    "k,lambda,status,final_objective,final_objective_rna,suboptimality,suboptimality_rna,fallback_epochs,"
    "metrics,message";

std::string sweep_metrics_name(Index k, double lambda);

int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err,
              std::vector<SweepCell>* cells = nullptr);

/// Parses argv and dispatches to the commands above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rna::cli
