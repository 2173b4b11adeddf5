#pragma once

// Desk-scale differentiable objectives used to exercise the extrapolation.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

namespace rna {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual Index dim() const = 0;
  virtual double value(const VectorXd& theta) const = 0;
  virtual VectorXd gradient(const VectorXd& theta) const = 0;

  /// Stationary point, when known (analytic or a cached reference).
  virtual std::optional<VectorXd> optimum() const { return std::nullopt; }
  /// Largest curvature, when known.
  virtual std::optional<double> smoothness() const { return std::nullopt; }

  /// Number of samples of a finite-sum objective; 0 for problems that are
  /// not sums (a stochastic pass then degenerates to one full-gradient step).
  virtual Index sample_count() const { return 0; }
  /// Gradient of the mean loss over `samples` (plus any regularizer).
  virtual VectorXd batch_gradient(const VectorXd& theta, std::span<const Index> samples) const;

  std::optional<double> optimal_value() const {
    if (auto opt = optimum()) return value(*opt);
    return std::nullopt;
  }
};

/// f(x) = 1/2 x^T A x - b^T x with A = Q diag(mu) Q^T, mu log-spaced in
/// [1, condition_number] and Q a seeded random rotation.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(MatrixXd hessian, VectorXd linear);

  std::string name() const override { return "quadratic"; }
  Index dim() const override { return b_.size(); }
  double value(const VectorXd& theta) const override;
  VectorXd gradient(const VectorXd& theta) const override;
  std::optional<VectorXd> optimum() const override { return optimum_; }
  std::optional<double> smoothness() const override { return smoothness_; }

  const MatrixXd& hessian() const { return a_; }
  const VectorXd& linear() const { return b_; }

 private:
  MatrixXd a_;
  VectorXd b_;
  VectorXd optimum_;
  double smoothness_;
};

QuadraticProblem make_quadratic(Index dim, double condition_number, std::uint64_t seed);

/// l2-regularized logistic loss, mean over samples, on Gaussian features with
/// labels from a planted separator. The reference optimum (l2 > 0 only) is
/// computed on first request by plain gradient descent to ||grad|| <= 1e-12.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(MatrixXd features, VectorXd labels, double l2);

  std::string name() const override { return "logistic"; }
  Index dim() const override { return x_.cols(); }
  double value(const VectorXd& theta) const override;
  VectorXd gradient(const VectorXd& theta) const override;
  std::optional<VectorXd> optimum() const override;
  std::optional<double> smoothness() const override { return smoothness_; }
  Index sample_count() const override { return x_.rows(); }
  VectorXd batch_gradient(const VectorXd& theta, std::span<const Index> samples) const override;

  const MatrixXd& features() const { return x_; }
  const VectorXd& labels() const { return y_; }
  double l2() const { return l2_; }

 private:
  MatrixXd x_;
  VectorXd y_;
  double l2_;
  double smoothness_;

  struct Reference {
    std::once_flag once;
    VectorXd theta;
  };
  std::shared_ptr<Reference> reference_ = std::make_shared<Reference>();
};

LogisticProblem make_logistic(Index n_samples, Index dim, double l2, std::uint64_t seed);

/// Mean squared error, 1/(2n) sum (f(x_i) - y_i)^2, of a one-hidden-layer
/// tanh network f(x) = w2^T tanh(W1 x + b1) + b2. Targets are centered.
///
/// Parameter layout: W1 (hidden x d_in, row-major), b1, w2, b2.
class MlpProblem final : public Problem {
 public:
  MlpProblem(MatrixXd inputs, VectorXd targets, Index hidden);

  std::string name() const override { return "mlp"; }
  Index dim() const override { return hidden_ * (x_.cols() + 2) + 1; }
  double value(const VectorXd& theta) const override;
  VectorXd gradient(const VectorXd& theta) const override;
  Index sample_count() const override { return x_.rows(); }
  VectorXd batch_gradient(const VectorXd& theta, std::span<const Index> samples) const override;

  Index input_dim() const { return x_.cols(); }
  Index hidden() const { return hidden_; }
  const MatrixXd& inputs() const { return x_; }
  const VectorXd& targets() const { return y_; }

 private:
  double loss_and_gradient(const VectorXd& theta, const MatrixXd& x, const VectorXd& y,
                           VectorXd* grad) const;

  MatrixXd x_;
  VectorXd y_;
  Index hidden_;
};

MlpProblem make_mlp(Index input_dim, Index hidden, Index n_samples, std::uint64_t seed);

}  // namespace rna
