#pragma once

// Reference computations used only by tests. None of these share code with
// the library paths they check.

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <random>

#include "rna/problems.hpp"

namespace rna::oracle {

using Wide = boost::multiprecision::cpp_bin_float_50;
using WideMatrix = Eigen::Matrix<Wide, Eigen::Dynamic, Eigen::Dynamic>;
using WideVector = Eigen::Matrix<Wide, Eigen::Dynamic, 1>;

/// z = (R^T R + lambda I)^{-1} 1 from a full eigendecomposition of the
/// system matrix, formed and decomposed in 50-digit arithmetic.
inline Eigen::VectorXd eigen_solve(const Eigen::MatrixXd& r, double lambda) {
  const WideMatrix rw = r.cast<Wide>();
  WideMatrix a = rw.transpose() * rw;
  for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, i) += Wide(lambda);
  Eigen::SelfAdjointEigenSolver<WideMatrix> es(a);
  const WideVector ones = WideVector::Ones(a.rows());
  const WideVector projected = es.eigenvectors().transpose() * ones;
  const WideVector scaled = projected.cwiseQuotient(es.eigenvalues());
  const WideVector z = es.eigenvectors() * scaled;
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = static_cast<double>(z(i));
  return out;
}

/// Central differences of problem.value, step scaled per coordinate.
inline Eigen::VectorXd finite_difference_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                                                  double step = 1e-6) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(theta(i)));
    probe(i) = theta(i) + h;
    const double up = problem.value(probe);
    probe(i) = theta(i) - h;
    const double down = problem.value(probe);
    probe(i) = theta(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double gradient_check_error(const Problem& problem, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd fd = finite_difference_gradient(problem, theta);
  const Eigen::VectorXd g = problem.gradient(theta);
  return (g - fd).norm() / std::max(fd.norm(), 1e-8);
}

/// Dense LU solve of A x = b.
inline Eigen::VectorXd direct_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return a.fullPivLu().solve(b);
}

/// Plain gradient descent on a quadratic, x_{k+1} = x_k - eta (A x_k - b),
/// returned column-wise (x_0 first).
inline Eigen::MatrixXd gd_iterates(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, Eigen::VectorXd x,
                                   double eta, int steps) {
  Eigen::MatrixXd out(x.size(), steps + 1);
  out.col(0) = x;
  for (int k = 0; k < steps; ++k) {
    x = x - eta * (a * x - b);
    out.col(k + 1) = x;
  }
  return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// Random coefficients summing to one.
inline Eigen::VectorXd random_unit_sum(Eigen::Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd c(k);
  for (Eigen::Index i = 0; i < k; ++i) c(i) = u(rng);
  c(k - 1) = 1.0 - c.head(k - 1).sum();
  return c;
}

}  // namespace rna::oracle
