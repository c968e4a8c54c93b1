#include <gtest/gtest.h>

#include <random>

#include "onebit/biht.hpp"

using namespace onebit;

namespace {

struct Problem
{
  ComplexLinearModel model;
  Eigen::VectorXcd x;
  OneBitMeasurements y;
};

Problem sparse_problem(std::uint64_t seed, double sigma2)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index m = 40, n = 30;
  Eigen::MatrixXcd a(m, n);
  for (Index i = 0; i < a.size(); ++i)
    a(i) = cdouble(normal(rng), normal(rng)) / std::sqrt(2.0 * m);
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
  x(3) = cdouble(1.0, 0.5);
  x(17) = cdouble(-0.7, 0.9);
  x(25) = cdouble(0.4, -1.2);
  auto cm = ComplexLinearModel::white(a, sigma2);
  auto y = synthesize(cm, Eigen::MatrixXcd(x), rng);
  return {std::move(cm), std::move(x), std::move(y)};
}

}  // namespace

TEST(HardThreshold, KeepsComplexPairs)
{
  Eigen::VectorXd v(6);  // complex components (3, 0.1), (0, 2), (1, 1)
  v << 3.0, 0.0, 1.0, 0.1, 2.0, 1.0;
  const Eigen::VectorXd out = hard_threshold_complex(v, 2);
  Eigen::VectorXd expected(6);
  expected << 3.0, 0.0, 0.0, 0.1, 2.0, 0.0;
  EXPECT_EQ(out, expected);
}

TEST(Biht, ExactSparsityAndUnitNorm)
{
  const auto p = sparse_problem(1, 0.01);
  const RealStackedModel model = stack_model(p.model);
  for (Index k : {Index{1}, Index{3}, Index{7}}) {
    BihtConfig cfg;
    cfg.sparsity = k;
    const auto r = biht_run(model, p.y.snapshot(0), cfg);
    EXPECT_NEAR(r.estimate.norm(), 1.0, 1e-12);
    EXPECT_EQ((r.estimate.array() != cdouble(0.0)).count(), k);
  }
}

// A = I (2 x 2 complex), x = e_1: y = csgn(x) = [1+1j, 1+1j] with sgn(0) = +1.
// Starting from e_1, A x_0 reproduces y exactly, so the residual is zero and
// the iterate never moves; the support is {0}.
TEST(Biht, NoiselessIdentityOneSparse)
{
  const ComplexLinearModel cm(Eigen::MatrixXcd::Identity(2, 2), Eigen::MatrixXcd::Zero(2, 2));
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(2);
  x(0) = 1.0;
  const Eigen::VectorXd y = stack_vector(csgn(x));
  BihtConfig cfg;
  cfg.sparsity = 1;
  const auto r = biht_run(stack_model(cm), y, cfg);
  EXPECT_EQ(r.estimate(0), cdouble(1.0, 0.0));
  EXPECT_EQ(r.estimate(1), cdouble(0.0, 0.0));
  for (Index mis : r.mismatches)
    EXPECT_EQ(mis, 0);
}

TEST(Biht, RecoversSupportWithoutNoise)
{
  const auto p = sparse_problem(2, 0.0);
  BihtConfig cfg;
  cfg.sparsity = 3;
  cfg.iterations = 300;
  const auto r = biht_run(stack_model(p.model), p.y.snapshot(0), cfg);
  const auto found = top_k_support(r.estimate, 3);
  EXPECT_EQ(found, (std::vector<Index>{3, 17, 25}));
}

// Run-and-record oracle on seed 2: the sign mismatch count settles, and
// does not increase over the final 10 iterations.
TEST(Biht, ConsistencySettlesOnFixedSeed)
{
  const auto p = sparse_problem(2, 0.0);
  BihtConfig cfg;
  cfg.sparsity = 3;
  cfg.iterations = 300;
  const auto r = biht_run(stack_model(p.model), p.y.snapshot(0), cfg);
  const auto& mis = r.mismatches;
  for (std::size_t t = mis.size() - 10; t < mis.size(); ++t)
    EXPECT_LE(mis[t], mis[t - 1]) << "iteration " << t;
}

TEST(Biht, ScalingMatrixAndInverseStep)
{
  const auto p = sparse_problem(3, 0.05);
  const RealStackedModel model = stack_model(p.model);
  const RealStackedModel doubled(2.0 * model.matrix(), model.noise_covariance());
  BihtConfig cfg;
  cfg.sparsity = 3;
  BihtConfig half = cfg;
  half.tau = cfg.tau / 2.0;
  const auto a = biht_run(model, p.y.snapshot(0), cfg);
  const auto b = biht_run(doubled, p.y.snapshot(0), half);
  EXPECT_LT((a.estimate - b.estimate).norm(), 1e-12);
}

TEST(Biht, RejectsBadConfig)
{
  const auto p = sparse_problem(1, 0.01);
  const RealStackedModel model = stack_model(p.model);
  BihtConfig cfg;
  cfg.sparsity = 0;
  EXPECT_THROW(biht_run(model, p.y.snapshot(0), cfg), InvalidArgument);
  cfg.sparsity = 31;
  EXPECT_THROW(biht_run(model, p.y.snapshot(0), cfg), InvalidArgument);
  cfg = {};
  cfg.tau = -1.0;
  EXPECT_THROW(biht_run(model, p.y.snapshot(0), cfg), InvalidArgument);
  cfg = {};
  EXPECT_THROW(biht_run(model, Eigen::VectorXd::Zero(80), cfg), InvalidArgument);
  EXPECT_THROW(biht_run(model, Eigen::VectorXd::Ones(10), cfg), DimensionError);
}
