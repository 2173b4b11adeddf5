#include "rna/problems.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rna/error.hpp"

namespace rna {
namespace {

MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

VectorXd gaussian_vector(Index n, std::mt19937_64& rng) { return gaussian_matrix(n, 1, rng); }

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// 1 / (1 + exp(t)).
double logistic_tail(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

VectorXd Problem::batch_gradient(const VectorXd& theta, std::span<const Index>) const {
  return gradient(theta);
}

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(MatrixXd hessian, VectorXd linear)
    : a_(std::move(hessian)), b_(std::move(linear)) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size() || b_.size() == 0) {
    throw Error(ErrorKind::InvalidConfig, "quadratic needs a square Hessian matching b");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::InvalidConfig, "quadratic Hessian must be positive definite");
  }
  smoothness_ = eig.eigenvalues().maxCoeff();
  optimum_ = a_.llt().solve(b_);
}

double QuadraticProblem::value(const VectorXd& theta) const {
  return 0.5 * theta.dot(a_ * theta) - b_.dot(theta);
}

VectorXd QuadraticProblem::gradient(const VectorXd& theta) const { return a_ * theta - b_; }

QuadraticProblem make_quadratic(Index dim, double condition_number, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorKind::InvalidConfig, "quadratic dimension must be >= 1");
  if (!(condition_number >= 1.0) || !std::isfinite(condition_number)) {
    throw Error(ErrorKind::InvalidConfig, "condition number must be finite and >= 1");
  }
  std::mt19937_64 rng(seed);
  VectorXd spectrum(dim);
  for (Index i = 0; i < dim; ++i) {
    const double t = dim == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(dim - 1);
    spectrum(i) = std::pow(condition_number, t);
  }
  const MatrixXd rotation = Eigen::HouseholderQR<MatrixXd>(gaussian_matrix(dim, dim, rng)).householderQ();
  MatrixXd a = rotation * spectrum.asDiagonal() * rotation.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  VectorXd b = gaussian_vector(dim, rng);
  return QuadraticProblem(std::move(a), std::move(b));
}

// ----------------------------------------------------------------- logistic

LogisticProblem::LogisticProblem(MatrixXd features, VectorXd labels, double l2)
    : x_(std::move(features)), y_(std::move(labels)), l2_(l2) {
  if (x_.rows() != y_.size() || x_.rows() == 0 || x_.cols() == 0) {
    throw Error(ErrorKind::InvalidConfig, "logistic needs n >= 1 samples of dimension >= 1");
  }
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error(ErrorKind::InvalidConfig, "l2 must be >= 0");
  const MatrixXd gram = x_.transpose() * x_;
  const double top = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  smoothness_ = top / (4.0 * static_cast<double>(x_.rows())) + l2_;
}

double LogisticProblem::value(const VectorXd& theta) const {
  const VectorXd margins = y_.cwiseProduct(x_ * theta);
  double loss = 0.0;
  for (Index i = 0; i < margins.size(); ++i) loss += softplus(-margins(i));
  return loss / static_cast<double>(margins.size()) + 0.5 * l2_ * theta.squaredNorm();
}

VectorXd LogisticProblem::gradient(const VectorXd& theta) const {
  const VectorXd margins = y_.cwiseProduct(x_ * theta);
  VectorXd weights(margins.size());
  for (Index i = 0; i < margins.size(); ++i) weights(i) = -y_(i) * logistic_tail(margins(i));
  return x_.transpose() * weights / static_cast<double>(margins.size()) + l2_ * theta;
}

VectorXd LogisticProblem::batch_gradient(const VectorXd& theta, std::span<const Index> samples) const {
  VectorXd grad = VectorXd::Zero(theta.size());
  for (Index i : samples) {
    const double margin = y_(i) * x_.row(i).dot(theta);
    grad.noalias() -= (y_(i) * logistic_tail(margin)) * x_.row(i).transpose();
  }
  grad /= static_cast<double>(samples.size());
  return grad + l2_ * theta;
}

std::optional<VectorXd> LogisticProblem::optimum() const {
  if (l2_ <= 0.0) return std::nullopt;
  std::call_once(reference_->once, [this] {
    // Step 2 / (L + mu) is the contraction-optimal constant step for plain GD.
    const double step = 2.0 / (smoothness_ + l2_);
    constexpr long kMaxIterations = 20'000'000;
    VectorXd theta = VectorXd::Zero(dim());
    for (long it = 0; it < kMaxIterations; ++it) {
      const VectorXd g = gradient(theta);
      if (g.norm() <= 1e-12) {
        reference_->theta = std::move(theta);
        return;
      }
      theta -= step * g;
    }
    throw Error(ErrorKind::NumericalFailure, "logistic reference optimum did not converge");
  });
  return reference_->theta;
}

LogisticProblem make_logistic(Index n_samples, Index dim, double l2, std::uint64_t seed) {
  if (n_samples < 1 || dim < 1) {
    throw Error(ErrorKind::InvalidConfig, "logistic needs n_samples >= 1 and dim >= 1");
  }
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw Error(ErrorKind::InvalidConfig, "l2 must be >= 0");
  std::mt19937_64 rng(seed);
  MatrixXd x = gaussian_matrix(n_samples, dim, rng);
  const VectorXd planted = gaussian_vector(dim, rng) / std::sqrt(static_cast<double>(dim));
  const VectorXd noise = gaussian_vector(n_samples, rng);
  const VectorXd scores = x * planted + 0.5 * noise;
  VectorXd labels = scores.unaryExpr([](double s) { return s >= 0.0 ? 1.0 : -1.0; });
  return LogisticProblem(std::move(x), std::move(labels), l2);
}

// ---------------------------------------------------------------------- mlp

MlpProblem::MlpProblem(MatrixXd inputs, VectorXd targets, Index hidden)
    : x_(std::move(inputs)), y_(std::move(targets)), hidden_(hidden) {
  if (x_.rows() != y_.size() || x_.rows() == 0 || x_.cols() == 0 || hidden < 1) {
    throw Error(ErrorKind::InvalidConfig, "mlp needs n >= 1, d_in >= 1, hidden >= 1");
  }
}

double MlpProblem::loss_and_gradient(const VectorXd& theta, const MatrixXd& x, const VectorXd& y,
                                     VectorXd* grad) const {
  if (theta.size() != dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "mlp expects " + std::to_string(dim()) + " parameters, got " + std::to_string(theta.size()));
  }
  const Index d_in = x_.cols();
  const Index h = hidden_;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> w1(theta.data(), h, d_in);
  const auto b1 = theta.segment(h * d_in, h);
  const auto w2 = theta.segment(h * d_in + h, h);
  const double b2 = theta(h * d_in + 2 * h);

  const double n = static_cast<double>(x.rows());
  MatrixXd pre = x * w1.transpose();
  pre.rowwise() += b1.transpose();
  const MatrixXd act = pre.array().tanh().matrix();
  const VectorXd err = (act * w2).array() + b2 - y.array();
  const double loss = 0.5 * err.squaredNorm() / n;

  if (grad != nullptr) {
    grad->resize(dim());
    const MatrixXd d_pre = ((err / n) * w2.transpose()).array() * (1.0 - act.array().square());
    Eigen::Map<RowMajor>(grad->data(), h, d_in) = d_pre.transpose() * x;
    grad->segment(h * d_in, h) = d_pre.colwise().sum().transpose();
    grad->segment(h * d_in + h, h) = act.transpose() * err / n;
    (*grad)(h * d_in + 2 * h) = err.sum() / n;
  }
  return loss;
}

double MlpProblem::value(const VectorXd& theta) const {
  return loss_and_gradient(theta, x_, y_, nullptr);
}

VectorXd MlpProblem::gradient(const VectorXd& theta) const {
  VectorXd grad;
  loss_and_gradient(theta, x_, y_, &grad);
  return grad;
}

VectorXd MlpProblem::batch_gradient(const VectorXd& theta, std::span<const Index> samples) const {
  MatrixXd x(static_cast<Index>(samples.size()), x_.cols());
  VectorXd y(static_cast<Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    x.row(static_cast<Index>(k)) = x_.row(samples[k]);
    y(static_cast<Index>(k)) = y_(samples[k]);
  }
  VectorXd grad;
  loss_and_gradient(theta, x, y, &grad);
  return grad;
}

MlpProblem make_mlp(Index input_dim, Index hidden, Index n_samples, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || n_samples < 1) {
    throw Error(ErrorKind::InvalidConfig, "mlp sizes must be >= 1");
  }
  std::mt19937_64 rng(seed);
  MatrixXd x = gaussian_matrix(n_samples, input_dim, rng);
  // Teacher network of the same shape, plus observation noise.
  const MatrixXd teacher_in = gaussian_matrix(hidden, input_dim, rng) / std::sqrt(static_cast<double>(input_dim));
  const VectorXd teacher_out = gaussian_vector(hidden, rng);
  const VectorXd noise = gaussian_vector(n_samples, rng);
  VectorXd y = (x * teacher_in.transpose()).array().tanh().matrix() * teacher_out + 0.1 * noise;
  y.array() -= y.mean();
  return MlpProblem(std::move(x), std::move(y), hidden);
}

}  // namespace rna
