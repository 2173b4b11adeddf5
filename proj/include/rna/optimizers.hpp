#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rna/extrapolation.hpp"
#include "rna/problems.hpp"

namespace rna {

struct ScheduleDrop {
  std::int64_t epoch = 0;
  double multiplier = 0.1;

  bool operator==(const ScheduleDrop&) const = default;
};

/// Heavy-ball SGD with L2 weight decay folded into the batch gradient:
///
///   v <- momentum * v + (g_batch(x) + weight_decay * x)
///   x <- x - eta(epoch) * v
///
/// momentum = weight_decay = 0 with full batches is plain gradient descent.
struct OptimizerConfig {
  double eta = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::vector<ScheduleDrop> schedule;
  /// Full batch when unset.
  std::optional<Index> batch_size;
  std::uint64_t seed = 0;

  bool operator==(const OptimizerConfig&) const = default;

  static OptimizerConfig plain_gd(double eta) {
    OptimizerConfig cfg;
    cfg.eta = eta;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    return cfg;
  }

  void validate() const;
  /// Base eta times every multiplier whose epoch is <= `epoch`.
  double eta_at(std::int64_t epoch) const;
  bool is_drop_epoch(std::int64_t epoch) const;
};

/// Norm above which an iterate counts as diverged.
inline constexpr double kDivergenceNorm = 1e12;

struct TraceRecord {
  std::int64_t epoch = 0;
  VectorXd theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  double eta = 0.0;
};

struct OptimizerTrace {
  VectorXd initial;
  std::vector<TraceRecord> records;

  /// x_0 followed by every epoch snapshot.
  IterateSequence<double> iterates() const;
};

struct RnaRecord {
  std::int64_t epoch = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  /// Unset when the last iterate was reported instead of an extrapolation.
  std::optional<double> lambda_used;
  Index window_size = 0;
  std::string failure;

  bool fell_back() const { return !lambda_used.has_value(); }
};

struct RnaTrace {
  std::vector<RnaRecord> records;
  /// Extrapolated point of the final epoch.
  VectorXd last_theta;
};

struct RunResult {
  OptimizerTrace vanilla;
  RnaTrace rna;
};

VectorXd gd_step(const VectorXd& theta, const Problem& problem, double eta);

struct MomentumState {
  VectorXd theta;
  VectorXd velocity;
};

/// One pass over the data in mini-batches shuffled deterministically from
/// (cfg.seed, epoch).
MomentumState sgd_momentum_epoch(const VectorXd& theta, const VectorXd& velocity, const Problem& problem,
                                 const OptimizerConfig& cfg, std::int64_t epoch);

/// Epochs 1..epochs from theta0, no extrapolation.
OptimizerTrace run_optimizer(const Problem& problem, const OptimizerConfig& cfg, const VectorXd& theta0,
                             std::int64_t epochs);

struct RnaRunOptions {
  /// On a learning-rate drop, restart the window from the pre-drop iterate.
  bool flush_on_drop = false;
};

/// Runs the optimizer and, after every epoch, extrapolates the sliding window
/// of the last rna_cfg.window + 1 iterates (x_0 enters at epoch 0). With a
/// lambda grid the objective picks the lambda and guards against regressions.
/// Extrapolated points are only reported, never fed back to the optimizer.
RunResult run_with_rna(const Problem& problem, const OptimizerConfig& opt_cfg, const RnaConfig& rna_cfg,
                       const VectorXd& theta0, std::int64_t epochs, const RnaRunOptions& options = {});

}  // namespace rna
