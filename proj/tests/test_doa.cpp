#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "onebit/doa.hpp"

using namespace onebit;

TEST(Grid, DefaultHas361Points)
{
  const auto g = angle_grid(-90, 90, 0.5);
  ASSERT_EQ(g.size(), 361u);
  EXPECT_EQ(g.front(), -90.0);
  EXPECT_EQ(g.back(), 90.0);
  EXPECT_EQ(g[174], -3.0);
  EXPECT_EQ(g[184], 2.0);
  EXPECT_EQ(g[330], 75.0);
  EXPECT_EQ(Scenario{}.true_indices(), (std::vector<Index>{174, 184, 330}));
}

TEST(Steering, Examples)
{
  const auto a0 = steering_vector(0.0, 4);
  for (Index m = 0; m < 4; ++m) {
    EXPECT_DOUBLE_EQ(a0(m).real(), 0.5);
    EXPECT_DOUBLE_EQ(a0(m).imag(), 0.0);
  }
  const auto a90 = steering_vector(90.0, 2, 0.5);
  EXPECT_NEAR(std::abs(a90(0) - cdouble(1.0 / std::sqrt(2.0), 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(a90(1) - cdouble(-1.0 / std::sqrt(2.0), 0.0)), 0.0, 1e-15);
  for (double theta : {-77.5, -3.0, 12.0, 45.5, 89.0})
    for (Index m : {Index{1}, Index{7}, Index{64}})
      EXPECT_NEAR(steering_vector(theta, m).norm(), 1.0, 1e-14);
}

TEST(Dictionary, ShapeGramAndConjugateSymmetry)
{
  const auto grid = angle_grid(-90, 90, 0.5);
  const auto a = build_dictionary(grid, 64);
  EXPECT_EQ(a.rows(), 64);
  EXPECT_EQ(a.cols(), 361);
  const Eigen::MatrixXcd gram = a.adjoint() * a;
  EXPECT_LT((gram.diagonal().real().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LE(gram.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  for (std::size_t i = 0; i < 180; ++i)
    EXPECT_LT((a.col(static_cast<Index>(i)) - a.col(static_cast<Index>(360 - i)).conjugate())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
}

TEST(DrawSources, RowSparseWithDbMagnitudes)
{
  Scenario s;
  s.snapshots = 5;
  std::mt19937_64 r1(3), r2(3);
  const auto x = draw_sources(s, r1);
  EXPECT_EQ(x.rows(), 361);
  EXPECT_EQ(x.cols(), 5);
  const Eigen::VectorXd rows = x.rowwise().norm();
  EXPECT_EQ((rows.array() > 0).count(), 3);
  for (Index l = 0; l < 5; ++l) {
    EXPECT_NEAR(std::abs(x(184, l)), std::pow(10.0, 22.0 / 20.0), 1e-12);
    EXPECT_NEAR(std::abs(x(184, l)), 12.589254117941675, 1e-12);
    EXPECT_NEAR(std::abs(x(174, l)), std::pow(10.0, 0.6), 1e-12);
  }
  EXPECT_EQ(x, draw_sources(s, r2));
}

TEST(Calibrate, Examples)
{
  EXPECT_DOUBLE_EQ(calibrate_noise_variance({0.0}, 1, 0.0, 1), 1.0);
  const double paper = calibrate_noise_variance({12, 22, 20}, 256, 10.0, 1);
  EXPECT_NEAR(paper, (std::pow(10, 1.2) + std::pow(10, 2.2) + 100.0) / 2560.0, 1e-15);
  EXPECT_NEAR(paper, 0.10716, 5e-6);
  EXPECT_NEAR(calibrate_noise_variance({12, 22, 20}, 128, 10.0, 1), 2.0 * paper, 1e-15);
  EXPECT_NEAR(calibrate_noise_variance({12, 22, 20}, 256, 10.0, 50), paper, 1e-15);
}

TEST(Calibrate, MatchesMonteCarloSignalPower)
{
  Scenario s;
  s.sensors = 256;
  s.snapshots = 1;
  const auto a = build_dictionary(s.grid, s.sensors);
  std::mt19937_64 rng(10);
  const int draws = 100000;
  double power = 0.0;
  for (int d = 0; d < draws; ++d)
    power += (a * draw_sources(s, rng)).squaredNorm();
  const double empirical = power / draws / (256.0 * std::pow(10.0, 1.0));
  EXPECT_NEAR(empirical / calibrate_noise_variance(s), 1.0, 0.01);
}

TEST(Nmse, SmvExamples)
{
  Eigen::VectorXcd x(2), xh(2);
  x << 1.0, 0.0;
  xh << 0.0, 1.0;
  EXPECT_DOUBLE_EQ(debiased_nmse_smv(x, xh), 0.0);
  xh << 1.0, 1.0;
  EXPECT_NEAR(debiased_nmse_smv(x, xh), 10.0 * std::log10(std::sqrt(0.5)), 1e-12);
  EXPECT_NEAR(debiased_nmse_smv(x, xh), -1.505149978, 1e-9);
  Eigen::VectorXcd y(3);
  y << cdouble(1, 2), cdouble(-0.5, 0.25), cdouble(0, 3);
  EXPECT_EQ(debiased_nmse_smv(y, 2.0 * y), nmse_floor_db);
  EXPECT_EQ(debiased_nmse_smv(y, Eigen::VectorXcd::Zero(3)), 0.0);
  EXPECT_THROW(debiased_nmse_smv(Eigen::VectorXcd::Zero(3), y), InvalidArgument);
}

TEST(Nmse, SmvScaleInvarianceAndSign)
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXcd x(8), xh(8);
    for (Index i = 0; i < 8; ++i) {
      x(i) = cdouble(n(rng), n(rng));
      xh(i) = cdouble(n(rng), n(rng));
    }
    const cdouble c(n(rng), n(rng));
    const double base = debiased_nmse_smv(x, xh);
    EXPECT_NEAR(debiased_nmse_smv(x, c * xh), base, 1e-10);
    EXPECT_LE(base, 0.0);
    EXPECT_EQ(debiased_nmse_smv(x, c * x), nmse_floor_db);
  }
}

TEST(Nmse, MmvPerRowDebiasing)
{
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(6, 4), xh(6, 4);
  for (Index i : {Index{1}, Index{4}})
    for (Index l = 0; l < 4; ++l)
      x(i, l) = cdouble(n(rng), n(rng));
  Eigen::MatrixXcd scaled = x;
  scaled.row(1) *= cdouble(3.0, -2.0);
  scaled.row(4) *= cdouble(-0.1, 0.0);
  EXPECT_EQ(debiased_nmse_mmv(x, scaled), nmse_floor_db);

  for (int rep = 0; rep < 30; ++rep) {
    for (Index i = 0; i < xh.size(); ++i)
      xh(i) = cdouble(n(rng), n(rng));
    const double mmv = debiased_nmse_mmv(x, xh);
    EXPECT_LE(mmv, 0.0);
    // With one snapshot, per-row debiasing can only do better than one scalar.
    EXPECT_LE(debiased_nmse_mmv(x.col(0), xh.col(0)), debiased_nmse_smv(x.col(0), xh.col(0)) + 1e-12);
  }
  EXPECT_THROW(debiased_nmse_mmv(Eigen::MatrixXcd::Zero(6, 4), xh), InvalidArgument);
}

TEST(TopK, ExamplesAndTies)
{
  Eigen::VectorXcd x(5);
  x << 0.0, 5.0, 0.0, 3.0, 4.0;
  EXPECT_EQ(top_k_support(x, 2), (std::vector<Index>{1, 4}));
  EXPECT_EQ(top_k_support(Eigen::VectorXcd::Ones(5), 2), (std::vector<Index>{0, 1}));
  Eigen::MatrixXcd xm = Eigen::MatrixXcd::Constant(4, 3, 0.1);
  xm.row(2) *= 10.0;
  EXPECT_EQ(top_k_support(xm, 1), (std::vector<Index>{2}));
  EXPECT_THROW(top_k_support(x, 6), InvalidArgument);
}

TEST(Detection, ExactSetMatch)
{
  Scenario s;
  EXPECT_TRUE(detection_success({330, 174, 184}, s));
  EXPECT_TRUE(detection_success({174, 184, 330}, s));
  EXPECT_FALSE(detection_success({174, 185, 330}, s));
  EXPECT_THROW(detection_success({174, 184}, s), InvalidArgument);
}

TEST(Scenario, Validation)
{
  Scenario s;
  s.true_doas = {-3.0, 2.25, 75.0};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.amplitudes_db = {1.0};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.grid = {0.0, 1.0, 1.0};
  s.true_doas = {0.0};
  s.amplitudes_db = {0.0};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.sensors = 0;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

namespace {

Scenario small_scenario()
{
  Scenario s;
  s.grid = angle_grid(-90, 90, 2.0);
  s.true_doas = {-4.0, 2.0, 76.0};
  s.sensors = 16;
  s.snr_db = 10.0;
  return s;
}

std::vector<AlgorithmSpec> small_algorithms()
{
  std::vector<AlgorithmSpec> algs;
  for (const char* id : {"bsbl", "bsbl-topk", "biht"}) {
    auto a = AlgorithmSpec::from_id(id);
    a.bsbl.iterations = 25;
    a.biht.iterations = 30;
    algs.push_back(a);
  }
  return algs;
}

}  // namespace

TEST(MonteCarlo, DeterministicAcrossRunsAndThreads)
{
  const auto s = small_scenario();
  const auto algs = small_algorithms();
  const auto a = run_monte_carlo(s, algs, 4, 42, 1);
  const auto b = run_monte_carlo(s, algs, 4, 42, 3);
  ASSERT_EQ(a.trials.size(), 12u);
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].algorithm, b.trials[i].algorithm);
    EXPECT_EQ(a.trials[i].trial, b.trials[i].trial);
    EXPECT_EQ(a.trials[i].nmse_db, b.trials[i].nmse_db);
    EXPECT_EQ(a.trials[i].support, b.trials[i].support);
  }
  EXPECT_EQ(a.bins, b.bins);
  const auto c = run_monte_carlo(s, algs, 4, 43, 1);
  EXPECT_NE(a.trials[0].nmse_db, c.trials[0].nmse_db);
}

TEST(MonteCarlo, BinCountsAndSummary)
{
  const auto s = small_scenario();
  const auto algs = small_algorithms();
  const auto r = run_monte_carlo(s, algs, 5, 9);
  for (const auto& sum : r.summary) {
    const auto& bins = r.bins.at(sum.algorithm);
    int total = 0;
    for (int c : bins)
      total += c;
    EXPECT_EQ(total, 3 * (sum.trials - sum.failed));
    EXPECT_EQ(sum.trials, 5);
    EXPECT_GE(sum.detection_rate, 0.0);
    EXPECT_LE(sum.detection_rate, 1.0);
    EXPECT_LE(sum.mean_nmse_db, 0.0);
  }
  // bsbl and bsbl-topk share one solve: same support and runtime per trial.
  for (std::size_t t = 0; t < r.trials.size(); t += 3) {
    EXPECT_EQ(r.trials[t].support, r.trials[t + 1].support);
    EXPECT_EQ(r.trials[t].runtime_s, r.trials[t + 1].runtime_s);
    EXPECT_EQ((r.trials[t + 1].estimate.rowwise().norm().array() > 0).count(), 3);
  }
}

TEST(MonteCarlo, RejectsBadInputs)
{
  auto s = small_scenario();
  EXPECT_THROW(run_monte_carlo(s, {}, 2, 1), InvalidArgument);
  EXPECT_THROW(run_monte_carlo(s, small_algorithms(), 0, 1), InvalidArgument);
  s.snapshots = 4;
  EXPECT_THROW(run_monte_carlo(s, small_algorithms(), 2, 1), InvalidArgument);
  auto dup = small_algorithms();
  dup[1].name = "bsbl";
  EXPECT_THROW(run_monte_carlo(small_scenario(), dup, 2, 1), InvalidArgument);
  EXPECT_THROW(AlgorithmSpec::from_id("svm"), InvalidArgument);
}
