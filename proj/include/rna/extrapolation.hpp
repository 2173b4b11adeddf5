#pragma once

// Regularized nonlinear acceleration of an iterate sequence.
//
// Given iterates x_0..x_K (oldest first) the residual matrix R holds the
// consecutive differences x_{k+1} - x_k. The coefficients solve
//
//     min_c ||R c||^2 + lambda ||c||^2   subject to  sum(c) = 1,
//
// whose solution is c = z / sum(z) with (R^T R + lambda I) z = 1. The
// extrapolated point is the affine combination of K of the K+1 iterates.
//
// Everything here works in double precision regardless of the scalar type
// the iterates are stored in.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rna/error.hpp"

namespace rna {

using Eigen::Index;

inline constexpr Index kDefaultWindow = 10;
inline constexpr double kDefaultLambda = 1e-8;

/// Which K of the K+1 iterates the coefficients weight.
enum class WeightTarget {
  LatestK,  ///< x_1..x_K: residual k is paired with the iterate it leads to
  OldestK,  ///< x_0..x_{K-1}
};

struct RnaConfig {
  Index window = kDefaultWindow;
  double lambda = kDefaultLambda;
  /// When non-empty, adaptive_rna searches these values instead of `lambda`.
  std::vector<double> lambda_grid;
  WeightTarget weight_target = WeightTarget::LatestK;

  bool operator==(const RnaConfig&) const = default;

  void validate() const {
    if (window < 1) {
      throw Error(ErrorKind::InvalidConfig, "window must be >= 1, got " + std::to_string(window));
    }
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw Error(ErrorKind::InvalidConfig, "lambda must be finite and >= 0");
    }
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!std::isfinite(lambda_grid[i]) || lambda_grid[i] <= 0.0) {
        throw Error(ErrorKind::InvalidConfig, "lambda grid entries must be finite and > 0");
      }
      if (i > 0 && lambda_grid[i] <= lambda_grid[i - 1]) {
        throw Error(ErrorKind::InvalidConfig, "lambda grid must be strictly ascending");
      }
    }
  }
};

/// Ordered window of parameter vectors, stored column-wise (one column per
/// iterate, oldest first). All columns share the dimension by construction.
template <typename Scalar>
class IterateSequence {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  IterateSequence() = default;

  explicit IterateSequence(Matrix iterates) : data_(std::move(iterates)) {
    if (data_.cols() > 0 && data_.rows() == 0) {
      throw Error(ErrorKind::DimensionMismatch, "iterates must have positive dimension");
    }
    if (!data_.allFinite()) {
      throw Error(ErrorKind::NumericalFailure, "iterate sequence contains non-finite entries");
    }
  }

  static IterateSequence from_vectors(std::span<const Vector> iterates) {
    if (iterates.empty()) return IterateSequence();
    const Index dim = iterates.front().size();
    Matrix data(dim, static_cast<Index>(iterates.size()));
    for (std::size_t k = 0; k < iterates.size(); ++k) {
      if (iterates[k].size() != dim) {
        throw Error(ErrorKind::DimensionMismatch,
                    "iterate " + std::to_string(k) + " has dimension " +
                        std::to_string(iterates[k].size()) + ", expected " + std::to_string(dim));
      }
      data.col(static_cast<Index>(k)) = iterates[k];
    }
    return IterateSequence(std::move(data));
  }

  Index dim() const { return data_.rows(); }
  Index size() const { return data_.cols(); }
  bool empty() const { return data_.cols() == 0; }

  auto operator[](Index k) const { return data_.col(k); }
  auto back() const { return data_.col(data_.cols() - 1); }
  const Matrix& matrix() const { return data_; }

  /// The most recent min(n, size()) iterates.
  IterateSequence latest(Index n) const {
    const Index keep = std::min(n, size());
    IterateSequence out;
    out.data_ = data_.rightCols(keep);
    return out;
  }

 private:
  Matrix data_;
};

/// d x K matrix whose column k is x_{k+1} - x_k.
using ResidualMatrix = Eigen::MatrixXd;

/// Solution z of the regularized system before normalization, together with
/// the regularization that was actually applied (it can exceed the requested
/// value after a singular-factor retry).
struct RawSolution {
  Eigen::VectorXd z;
  double lambda_used = 0.0;
};

struct ExtrapolationCoefficients {
  Eigen::VectorXd weights;
  double lambda_used = 0.0;
  Eigen::VectorXd raw_solution;
};

struct RnaResult {
  Eigen::VectorXd theta;
  ExtrapolationCoefficients coefficients;
};

template <typename Scalar>
ResidualMatrix build_residuals(const IterateSequence<Scalar>& seq) {
  const Index m = seq.size();
  if (m < 2) {
    throw Error(ErrorKind::WindowTooSmall,
                "need at least 2 iterates to form a residual, got " + std::to_string(m));
  }
  const auto& x = seq.matrix();
  return x.rightCols(m - 1).template cast<double>() - x.leftCols(m - 1).template cast<double>();
}

namespace detail {

inline bool factor_is_singular(const Eigen::MatrixXd& factor, Index k) {
  const auto diag = factor.topLeftCorner(k, k).diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  return !(largest > 0.0) ||
         diag.minCoeff() <= static_cast<double>(k) * std::numeric_limits<double>::epsilon() * largest;
}

// z = (R^T R + lambda I)^{-1} 1 through the thin QR of [R; sqrt(lambda) I],
// whose triangular factor U satisfies U^T U = R^T R + lambda I.
inline std::optional<Eigen::VectorXd> solve_stacked(const Eigen::Ref<const Eigen::MatrixXd>& residuals,
                                                    double lambda) {
  const Index d = residuals.rows();
  const Index k = residuals.cols();
  Eigen::MatrixXd stacked(d + k, k);
  stacked.topRows(d) = residuals;
  stacked.bottomRows(k).setZero();
  stacked.bottomRows(k).diagonal().setConstant(std::sqrt(lambda));

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(std::move(stacked));
  const Eigen::MatrixXd& packed = qr.matrixQR();
  if (factor_is_singular(packed, k)) return std::nullopt;

  const auto upper = packed.topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::VectorXd z = Eigen::VectorXd::Ones(k);
  upper.transpose().solveInPlace(z);
  upper.solveInPlace(z);
  if (!z.allFinite()) return std::nullopt;
  return z;
}

}  // namespace detail

/// Solves (R^T R + lambda I) z = 1.
///
/// lambda == 0 requires R to have numerically full column rank; otherwise
/// SingularSystem is raised. For lambda > 0 a numerically singular factor
/// triggers one retry with lambda + 10 eps trace(R^T R).
template <typename Derived>
RawSolution solve_regularized(const Eigen::MatrixBase<Derived>& residuals, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorKind::InvalidConfig, "lambda must be finite and >= 0");
  }
  if (residuals.cols() < 1) {
    throw Error(ErrorKind::WindowTooSmall, "residual matrix has no columns");
  }
  const Eigen::MatrixXd r = residuals.template cast<double>();
  if (!r.allFinite()) {
    throw Error(ErrorKind::NumericalFailure, "residual matrix contains non-finite entries");
  }

  if (auto z = detail::solve_stacked(r, lambda)) return {std::move(*z), lambda};

  if (lambda > 0.0) {
    const double trace = r.squaredNorm();
    const double bumped = lambda + 10.0 * std::numeric_limits<double>::epsilon() * trace;
    if (auto z = detail::solve_stacked(r, bumped)) return {std::move(*z), bumped};
  }
  throw Error(ErrorKind::SingularSystem,
              lambda == 0.0
                  ? "R^T R is singular (repeated or collinear iterates); use lambda > 0"
                  : "regularized system is numerically singular; increase lambda");
}

/// || R^T (R z) + lambda z - 1 ||_2, evaluated in factored form so the check
/// does not itself square the conditioning of R.
template <typename Derived>
double solve_residual(const Eigen::MatrixBase<Derived>& residuals, double lambda,
                      const Eigen::VectorXd& z) {
  const Eigen::VectorXd rz = residuals.template cast<double>() * z;
  Eigen::VectorXd lhs = residuals.template cast<double>().transpose() * rz;
  lhs += lambda * z;
  return (lhs - Eigen::VectorXd::Ones(z.size())).norm();
}

inline ExtrapolationCoefficients normalize(const RawSolution& raw) {
  const Eigen::VectorXd& z = raw.z;
  if (z.size() == 0) throw Error(ErrorKind::WindowTooSmall, "empty raw solution");
  if (!z.allFinite()) throw Error(ErrorKind::NumericalFailure, "raw solution is not finite");
  const double total = z.sum();
  if (!(std::abs(total) >= 1e-12 * z.lpNorm<1>())) {
    throw Error(ErrorKind::DegenerateSum,
                "coefficients sum to (numerically) zero; increase lambda");
  }
  return {z / total, raw.lambda_used, z};
}

inline ExtrapolationCoefficients normalize(const Eigen::VectorXd& z) { return normalize(RawSolution{z, 0.0}); }

/// |sum(c) - 1| <= tol * ||c||_1. Affine weights may be large and of mixed
/// sign, so the tolerance scales with the l1 mass the sum is formed from.
inline bool has_unit_sum(const Eigen::VectorXd& c, double tol = 1e-12) {
  return c.allFinite() && std::abs(c.sum() - 1.0) <= tol * std::max(1.0, c.lpNorm<1>());
}

template <typename Scalar>
Eigen::VectorXd extrapolate(const IterateSequence<Scalar>& seq, const ExtrapolationCoefficients& c,
                            WeightTarget target = WeightTarget::LatestK) {
  const Index k = c.weights.size();
  if (seq.size() < 2 || k != seq.size() - 1) {
    throw Error(ErrorKind::DimensionMismatch,
                std::to_string(k) + " coefficients for " + std::to_string(seq.size()) + " iterates");
  }
  const Index offset = target == WeightTarget::LatestK ? 1 : 0;
  return seq.matrix().middleCols(offset, k).template cast<double>() * c.weights;
}

/// Extrapolation on the last min(size, window + 1) iterates with the
/// fixed `cfg.lambda`.
template <typename Scalar>
RnaResult accelerate(const IterateSequence<Scalar>& seq, const RnaConfig& cfg) {
  cfg.validate();
  if (seq.size() < 2) {
    throw Error(ErrorKind::WindowTooSmall,
                "need at least 2 iterates, got " + std::to_string(seq.size()));
  }
  const IterateSequence<Scalar> window = seq.latest(cfg.window + 1);
  const ResidualMatrix residuals = build_residuals(window);
  ExtrapolationCoefficients coefficients = normalize(solve_regularized(residuals, cfg.lambda));
  Eigen::VectorXd theta = extrapolate(window, coefficients, cfg.weight_target);
  return {std::move(theta), std::move(coefficients)};
}

struct AdaptiveResult {
  Eigen::VectorXd theta;
  double score = 0.0;
  /// Empty when the last iterate was returned.
  std::optional<double> lambda;
  std::optional<ExtrapolationCoefficients> coefficients;

  bool fell_back() const { return !lambda.has_value(); }
};

/// Runs accelerate for every lambda of `cfg.lambda_grid` (or `cfg.lambda` when the
/// grid is empty) and keeps the candidate with the smallest score. The last
/// iterate is always a candidate and wins ties, so the returned score never
/// exceeds score(last iterate). Grid points that fail are skipped.
template <typename Scalar, typename Score>
  requires std::invocable<Score&, const Eigen::VectorXd&>
AdaptiveResult accelerate_adaptive(const IterateSequence<Scalar>& seq, const RnaConfig& cfg,
                                    Score&& score) {
  cfg.validate();
  if (seq.empty()) throw Error(ErrorKind::WindowTooSmall, "empty iterate sequence");

  AdaptiveResult best;
  best.theta = seq.back().template cast<double>();
  best.score = static_cast<double>(score(best.theta));
  if (seq.size() < 2) return best;

  const std::vector<double> grid =
      cfg.lambda_grid.empty() ? std::vector<double>{cfg.lambda} : cfg.lambda_grid;
  for (double lambda : grid) {
    RnaConfig single = cfg;
    single.lambda = lambda;
    single.lambda_grid.clear();
    try {
      RnaResult candidate = accelerate(seq, single);
      const double s = static_cast<double>(score(candidate.theta));
      if (std::isfinite(s) && (!std::isfinite(best.score) || s < best.score)) {
        best.theta = std::move(candidate.theta);
        best.score = s;
        best.lambda = candidate.coefficients.lambda_used;
        best.coefficients = std::move(candidate.coefficients);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidConfig) throw;
    }
  }
  return best;
}

}  // namespace rna
