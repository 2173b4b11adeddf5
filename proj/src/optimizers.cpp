#include "rna/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "rna/error.hpp"
#include "rna/sliding_buffer.hpp"

namespace rna {
namespace {

void check_iterate(const VectorXd& theta, std::int64_t epoch) {
  if (!theta.allFinite() || theta.norm() > kDivergenceNorm) {
    throw Error(ErrorKind::NumericalFailure, "optimizer diverged in epoch " + std::to_string(epoch));
  }
}

// Advances one epoch from `state`; shared by the plain and RNA runs so both
// produce the same floating-point sequence.
void advance(MomentumState& state, const Problem& problem, const OptimizerConfig& cfg, std::int64_t epoch) {
  state = sgd_momentum_epoch(state.theta, state.velocity, problem, cfg, epoch);
}

TraceRecord make_record(const Problem& problem, const VectorXd& theta, std::int64_t epoch, double eta) {
  return {epoch, theta, problem.value(theta), problem.gradient(theta).norm(), eta};
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::InvalidConfig, "eta must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw Error(ErrorKind::InvalidConfig, "weight decay must be >= 0");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].multiplier > 0.0) || !std::isfinite(schedule[i].multiplier)) {
      throw Error(ErrorKind::InvalidConfig, "schedule multipliers must be > 0");
    }
    if (i > 0 && schedule[i].epoch <= schedule[i - 1].epoch) {
      throw Error(ErrorKind::InvalidConfig, "schedule epochs must be strictly increasing");
    }
  }
  if (batch_size && *batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch size must be >= 1");
}

double OptimizerConfig::eta_at(std::int64_t epoch) const {
  double value = eta;
  for (const auto& drop : schedule) {
    if (drop.epoch <= epoch) value *= drop.multiplier;
  }
  return value;
}

bool OptimizerConfig::is_drop_epoch(std::int64_t epoch) const {
  return std::any_of(schedule.begin(), schedule.end(), [&](const ScheduleDrop& d) { return d.epoch == epoch; });
}

IterateSequence<double> OptimizerTrace::iterates() const {
  Eigen::MatrixXd data(initial.size(), static_cast<Index>(records.size()) + 1);
  data.col(0) = initial;
  for (std::size_t k = 0; k < records.size(); ++k) data.col(static_cast<Index>(k) + 1) = records[k].theta;
  return IterateSequence<double>(std::move(data));
}

VectorXd gd_step(const VectorXd& theta, const Problem& problem, double eta) {
  if (!(eta > 0.0)) throw Error(ErrorKind::InvalidConfig, "eta must be > 0");
  const VectorXd grad = problem.gradient(theta);
  if (!grad.allFinite()) throw Error(ErrorKind::NumericalFailure, "non-finite gradient");
  return theta - eta * grad;
}

MomentumState sgd_momentum_epoch(const VectorXd& theta, const VectorXd& velocity, const Problem& problem,
                                 const OptimizerConfig& cfg, std::int64_t epoch) {
  cfg.validate();
  if (theta.size() != problem.dim() || velocity.size() != theta.size()) {
    throw Error(ErrorKind::DimensionMismatch, "parameter/velocity size does not match the problem");
  }
  const double eta = cfg.eta_at(epoch);
  MomentumState state{theta, velocity};

  auto apply = [&](const VectorXd& batch_grad) {
    if (!batch_grad.allFinite()) {
      throw Error(ErrorKind::NumericalFailure, "non-finite gradient in epoch " + std::to_string(epoch));
    }
    state.velocity = cfg.momentum * state.velocity + (batch_grad + cfg.weight_decay * state.theta);
    state.theta -= eta * state.velocity;
    check_iterate(state.theta, epoch);
  };

  const Index n = problem.sample_count();
  if (n == 0 || !cfg.batch_size || *cfg.batch_size >= n) {
    if (n > 0 && cfg.batch_size && *cfg.batch_size > n) {
      throw Error(ErrorKind::InvalidConfig, "batch size exceeds the number of samples");
    }
    apply(problem.gradient(state.theta));
    return state;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  const auto batch = static_cast<std::size_t>(*cfg.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t len = std::min(batch, order.size() - start);
    apply(problem.batch_gradient(state.theta, std::span<const Index>(order.data() + start, len)));
  }
  return state;
}

OptimizerTrace run_optimizer(const Problem& problem, const OptimizerConfig& cfg, const VectorXd& theta0,
                             std::int64_t epochs) {
  cfg.validate();
  if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  check_iterate(theta0, 0);
  OptimizerTrace trace{theta0, {}};
  MomentumState state{theta0, VectorXd::Zero(theta0.size())};
  for (std::int64_t epoch = 1; epoch <= epochs; ++epoch) {
    advance(state, problem, cfg, epoch);
    trace.records.push_back(make_record(problem, state.theta, epoch, cfg.eta_at(epoch)));
  }
  return trace;
}

RunResult run_with_rna(const Problem& problem, const OptimizerConfig& opt_cfg, const RnaConfig& rna_cfg,
                       const VectorXd& theta0, std::int64_t epochs, const RnaRunOptions& options) {
  opt_cfg.validate();
  rna_cfg.validate();
  if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  check_iterate(theta0, 0);

  RunResult result;
  result.vanilla.initial = theta0;
  SlidingBuffer<double> buffer(static_cast<std::size_t>(rna_cfg.window) + 1);
  buffer.push(0, theta0);

  const bool adaptive = !rna_cfg.lambda_grid.empty();
  const auto score = [&problem](const VectorXd& x) { return problem.value(x); };

  MomentumState state{theta0, VectorXd::Zero(theta0.size())};
  for (std::int64_t epoch = 1; epoch <= epochs; ++epoch) {
    advance(state, problem, opt_cfg, epoch);
    result.vanilla.records.push_back(make_record(problem, state.theta, epoch, opt_cfg.eta_at(epoch)));

    if (options.flush_on_drop && opt_cfg.is_drop_epoch(epoch)) buffer.flush_keep_latest();
    buffer.push(epoch, state.theta);
    const IterateSequence<double> window = buffer.snapshot();

    RnaRecord record;
    record.epoch = epoch;
    record.window_size = window.size();
    VectorXd theta_hat;
    try {
      if (adaptive) {
        AdaptiveResult chosen = accelerate_adaptive(window, rna_cfg, score);
        theta_hat = std::move(chosen.theta);
        record.lambda_used = chosen.lambda;
        if (chosen.fell_back()) record.failure = "no grid point improved on the last iterate";
      } else {
        RnaResult out = accelerate(window, rna_cfg);
        theta_hat = std::move(out.theta);
        record.lambda_used = out.coefficients.lambda_used;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidConfig) throw;
      theta_hat = state.theta;
      record.lambda_used.reset();
      record.failure = e.what();
    }
    record.objective = problem.value(theta_hat);
    record.grad_norm = problem.gradient(theta_hat).norm();
    result.rna.records.push_back(std::move(record));
    result.rna.last_theta = std::move(theta_hat);
  }
  return result;
}

}  // namespace rna
