#pragma once

// Experiment descriptions and their plain-text configuration format.
//
// A configuration file holds one `key = value` pair per line; blank lines and
// lines starting with '#' are ignored. Keys:
//
//   problem        quadratic | logistic | mlp
//   dim            parameter dimension (input dimension for mlp)
//   condition      quadratic condition number
//   samples        logistic / mlp sample count
//   l2             logistic ridge weight
//   hidden         mlp hidden units
//   seed           seeds problem data, the start point and batch shuffling
//   init_scale     start point is init_scale * N(0, I)
//   epochs
//   eta            step size, or `auto` (1/L when L is known, else 0.1)
//   momentum, weight_decay
//   schedule       comma list of epoch:multiplier, e.g. 150:0.1,250:0.1
//   batch_size     `full` or a positive integer
//   k, lambda
//   lambda_grid    comma list (empty disables the adaptive search)
//   weight_target  latest | oldest
//   flush_on_drop  true | false
//   metrics_out, checkpoint_out, iterates_out   (empty = not written)

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rna/extrapolation.hpp"
#include "rna/optimizers.hpp"
#include "rna/problems.hpp"

namespace rna {

enum class ProblemKind { Quadratic, Logistic, Mlp };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Quadratic;
  Index dim = 20;
  double condition = 100.0;
  Index samples = 500;
  double l2 = 1e-3;
  Index hidden = 8;

  bool operator==(const ProblemSpec&) const = default;
};

struct ExperimentSpec {
  ProblemSpec problem;
  OptimizerConfig optimizer;
  /// When set, optimizer.eta is replaced by 1/L (or 0.1 without L) at run time.
  bool auto_eta = true;
  RnaConfig rna;
  std::int64_t epochs = 100;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  bool flush_on_drop = false;
  std::filesystem::path metrics_out = "metrics.csv";
  std::filesystem::path checkpoint_out;
  std::filesystem::path iterates_out;

  bool operator==(const ExperimentSpec&) const = default;
};

/// Applies one configuration entry; unknown keys and malformed values raise
/// InvalidConfig.
void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value);

ExperimentSpec parse_config(std::string_view text, ExperimentSpec base = {});
ExperimentSpec load_config(const std::filesystem::path& path, ExperimentSpec base = {});
std::string to_config_text(const ExperimentSpec& spec);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_exact(double value);
double parse_double(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

std::unique_ptr<Problem> make_problem(const ExperimentSpec& spec);
VectorXd initial_point(const ExperimentSpec& spec, Index dim);
/// The optimizer configuration with eta resolved and the seed filled in.
OptimizerConfig resolved_optimizer(const ExperimentSpec& spec, const Problem& problem);

}  // namespace rna
