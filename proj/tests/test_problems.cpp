#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rna/error.hpp"
#include "rna/problems.hpp"

using namespace rna;

namespace {

VectorXd random_point(Index d, std::mt19937_64& rng, double scale = 1.0) {
  return scale * oracle::random_matrix(d, 1, rng);
}

}  // namespace

TEST(Quadratic, ScalarInstance) {
  const auto q = make_quadratic(1, 1.0, 4);
  EXPECT_DOUBLE_EQ(q.hessian()(0, 0), 1.0);
  const double b = q.linear()(0);
  const VectorXd t = VectorXd::Constant(1, 0.75);
  EXPECT_NEAR(q.value(t), 0.5 * 0.75 * 0.75 - b * 0.75, 1e-15);
  EXPECT_NEAR((*q.optimum())(0), b, 1e-15);
}

TEST(Quadratic, OptimumBeatsRandomPoints) {
  const auto q = make_quadratic(10, 50.0, 1);
  const double best = q.value(*q.optimum());
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_LE(best, q.value(random_point(10, rng, 3.0)));
}

TEST(Quadratic, OptimumMatchesDirectSolve) {
  const auto q = make_quadratic(20, 100.0, 7);
  const VectorXd direct = oracle::direct_solve(q.hessian(), q.linear());
  EXPECT_LE(q.gradient(direct).norm(), 1e-10);
  EXPECT_LE((*q.optimum() - direct).norm(), 1e-10);
}

TEST(Quadratic, LogSpacedSpectrum) {
  const auto q = make_quadratic(20, 100.0, 7);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.hessian());
  for (Index i = 0; i < 20; ++i) {
    EXPECT_NEAR(es.eigenvalues()(i), std::pow(100.0, i / 19.0), 1e-10 * std::pow(100.0, i / 19.0));
  }
  EXPECT_NEAR(*q.smoothness(), 100.0, 1e-10);
  EXPECT_EQ(q.hessian(), q.hessian().transpose());
}

TEST(Quadratic, SeededConstructionIsDeterministic) {
  const auto a = make_quadratic(15, 30.0, 99);
  const auto b = make_quadratic(15, 30.0, 99);
  const auto c = make_quadratic(15, 30.0, 100);
  EXPECT_EQ(a.hessian(), b.hessian());
  EXPECT_EQ(a.linear(), b.linear());
  EXPECT_NE(a.linear(), c.linear());
}

TEST(Quadratic, InvalidConfig) {
  EXPECT_THROW(make_quadratic(0, 10.0, 0), Error);
  EXPECT_THROW(make_quadratic(3, 0.5, 0), Error);
}

TEST(Quadratic, GradientIsAffineUnderUnitSumCombinations) {
  const auto q = make_quadratic(20, 100.0, 5);
  std::mt19937_64 rng(6);
  const MatrixXd points = oracle::random_matrix(20, 8, rng);
  MatrixXd grads(20, 8);
  for (Index k = 0; k < 8; ++k) grads.col(k) = q.gradient(points.col(k));
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd c = oracle::random_unit_sum(8, rng);
    EXPECT_LE((q.gradient(points * c) - grads * c).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Logistic, ConvexAlongRandomRays) {
  const auto p = make_logistic(200, 10, 1e-3, 1);
  std::mt19937_64 rng(4);
  for (int ray = 0; ray < 100; ++ray) {
    const VectorXd a = random_point(10, rng, 2.0);
    const VectorXd b = random_point(10, rng, 2.0);
    EXPECT_LE(p.value(0.5 * (a + b)), 0.5 * (p.value(a) + p.value(b)) + 1e-14);
  }
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  const auto p = make_logistic(100, 12, 1e-2, 2);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_LE(oracle::gradient_check_error(p, random_point(12, rng)), 1e-5);
}

TEST(Logistic, ReferenceOptimumIsReproducible) {
  const auto a = make_logistic(500, 50, 1e-3, 3);
  const auto b = make_logistic(500, 50, 1e-3, 3);
  const VectorXd ta = *a.optimum();
  EXPECT_LE(a.gradient(ta).norm(), 1e-12);
  EXPECT_NEAR(*a.optimal_value(), *b.optimal_value(), 1e-10);
  // Cached: a second request returns the same point.
  EXPECT_EQ(*a.optimum(), ta);
}

TEST(Logistic, NoReferenceWithoutRegularization) {
  EXPECT_FALSE(make_logistic(20, 3, 0.0, 1).optimum().has_value());
}

TEST(Logistic, FullBatchGradientMatchesGradient) {
  const auto p = make_logistic(60, 5, 1e-2, 8);
  std::vector<Index> all(60);
  std::iota(all.begin(), all.end(), Index{0});
  std::mt19937_64 rng(1);
  const VectorXd t = random_point(5, rng);
  EXPECT_LE((p.batch_gradient(t, all) - p.gradient(t)).norm(), 1e-14);
}

TEST(Logistic, InvalidConfig) {
  EXPECT_THROW(make_logistic(0, 3, 1e-3, 0), Error);
  EXPECT_THROW(make_logistic(10, 0, 1e-3, 0), Error);
  EXPECT_THROW(make_logistic(10, 3, -1.0, 0), Error);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto p = make_mlp(4, 6, 50, 9);
  EXPECT_EQ(p.dim(), 6 * (4 + 2) + 1);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 20; ++i) EXPECT_LE(oracle::gradient_check_error(p, random_point(p.dim(), rng)), 1e-5);
}

TEST(Mlp, OutputBiasGradientAtZeroWeights) {
  const auto p = make_mlp(3, 4, 40, 2);
  const Index bias = p.dim() - 1;
  VectorXd theta = VectorXd::Zero(p.dim());
  const double mean_target = p.targets().mean();
  EXPECT_NEAR(mean_target, 0.0, 1e-15);
  VectorXd g = p.gradient(theta);
  // d/d b2 of 1/(2n) sum (b2 - y)^2 is b2 - mean(y).
  EXPECT_NEAR(g(bias), -mean_target, 1e-15);
  // Hidden activations are tanh(0) = 0, so the output weights get nothing.
  EXPECT_TRUE(g.segment(bias - 4, 4).isZero(0.0));
  theta(bias) = 0.3;
  g = p.gradient(theta);
  EXPECT_NEAR(g(bias), 0.3 - mean_target, 1e-15);
}

TEST(Mlp, InvariantUnderHiddenUnitPermutation) {
  const Index d_in = 3;
  const Index h = 5;
  const auto p = make_mlp(d_in, h, 30, 4);
  std::mt19937_64 rng(12);
  const VectorXd theta = random_point(p.dim(), rng);
  std::vector<Index> perm(h);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  VectorXd permuted = theta;
  for (Index u = 0; u < h; ++u) {
    const Index src = perm[static_cast<std::size_t>(u)];
    permuted.segment(u * d_in, d_in) = theta.segment(src * d_in, d_in);
    permuted(h * d_in + u) = theta(h * d_in + src);
    permuted(h * d_in + h + u) = theta(h * d_in + h + src);
  }
  EXPECT_NEAR(p.value(permuted), p.value(theta), 1e-12);
}

TEST(Mlp, FullBatchGradientMatchesGradient) {
  const auto p = make_mlp(2, 3, 25, 3);
  std::vector<Index> all(25);
  std::iota(all.begin(), all.end(), Index{0});
  std::mt19937_64 rng(2);
  const VectorXd t = random_point(p.dim(), rng);
  EXPECT_LE((p.batch_gradient(t, all) - p.gradient(t)).norm(), 1e-14);
}

TEST(Mlp, RejectsBadSizes) {
  EXPECT_THROW(make_mlp(0, 3, 10, 0), Error);
  EXPECT_THROW(make_mlp(3, 0, 10, 0), Error);
  const auto p = make_mlp(2, 2, 5, 0);
  EXPECT_THROW(p.value(VectorXd::Zero(3)), Error);
}
