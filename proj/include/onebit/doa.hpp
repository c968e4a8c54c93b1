#pragma once

// Uniform-linear-array DOA scenario, metrics and the Monte-Carlo harness.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "onebit/biht.hpp"
#include "onebit/bsbl.hpp"
#include "onebit/error.hpp"
#include "onebit/model.hpp"
#include "onebit/support.hpp"

namespace onebit {

/// Reported in place of -inf dB for an exact (debiased) reconstruction.
inline constexpr double nmse_floor_db = -300.0;

/// start, start + step, ... up to and including `stop`.
inline std::vector<double> angle_grid(double start, double stop, double step)
{
  if (!(step > 0.0) || !(stop >= start))
    throw InvalidArgument("angle_grid: need step > 0 and stop >= start");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = start + static_cast<double>(i) * step;
  return grid;
}

struct Scenario
{
  std::vector<double> grid = angle_grid(-90.0, 90.0, 0.5);
  std::vector<double> true_doas = {-3.0, 2.0, 75.0};
  std::vector<double> amplitudes_db = {12.0, 22.0, 20.0};
  Index sensors = 64;    ///< M
  Index snapshots = 1;   ///< L
  double snr_db = 10.0;
  double d_over_lambda = 0.5;
  std::uint64_t seed = 1;

  Index sources() const { return static_cast<Index>(true_doas.size()); }

  /// Grid index of each true DOA (order of `true_doas`). Throws if a DOA is
  /// not on the grid.
  std::vector<Index> true_indices() const
  {
    std::vector<Index> out;
    for (double doa : true_doas) {
      Index found = -1;
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (std::abs(grid[i] - doa) <= 1e-9) {
          found = static_cast<Index>(i);
          break;
        }
      if (found < 0) {
        std::ostringstream msg;
        msg << "Scenario: true DOA " << doa << " is not on the grid";
        throw InvalidArgument(msg.str());
      }
      out.push_back(found);
    }
    return out;
  }

  void validate() const
  {
    if (sensors < 1)
      throw InvalidArgument("Scenario: M must be >= 1");
    if (snapshots < 1)
      throw InvalidArgument("Scenario: L must be >= 1");
    if (grid.empty())
      throw InvalidArgument("Scenario: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1]))
        throw InvalidArgument("Scenario: grid must be strictly increasing");
    if (true_doas.empty())
      throw InvalidArgument("Scenario: no sources");
    if (amplitudes_db.size() != true_doas.size())
      throw InvalidArgument("Scenario: one amplitude per source required");
    const auto idx = true_indices();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = i + 1; j < idx.size(); ++j)
        if (idx[i] == idx[j])
          throw InvalidArgument("Scenario: duplicate true DOA");
    if (!(d_over_lambda > 0.0))
      throw InvalidArgument("Scenario: d_over_lambda must be positive");
  }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// a(theta)_m = exp(-j 2 pi m (d / lambda) sin(theta)) / sqrt(M).
inline Eigen::VectorXcd steering_vector(double theta_deg, Index sensors, double d_over_lambda = 0.5)
{
  const double scale = 1.0 / std::sqrt(static_cast<double>(sensors));
  const double phase_step = -2.0 * std::numbers::pi * d_over_lambda * std::sin(deg_to_rad(theta_deg));
  Eigen::VectorXcd a(sensors);
  for (Index m = 0; m < sensors; ++m)
    a(m) = std::polar(scale, phase_step * static_cast<double>(m));
  return a;
}

/// M x G matrix whose columns are the steering vectors of `grid`.
inline Eigen::MatrixXcd build_dictionary(const std::vector<double>& grid, Index sensors,
                                         double d_over_lambda = 0.5)
{
  Eigen::MatrixXcd a(sensors, static_cast<Index>(grid.size()));
  for (std::size_t g = 0; g < grid.size(); ++g)
    a.col(static_cast<Index>(g)) = steering_vector(grid[g], sensors, d_over_lambda);
  return a;
}

/// Row-sparse G x L source matrix: 10^(dB/20) e^{j phi} on the true-DOA rows,
/// phases iid uniform on [0, 2 pi).
template <class Rng>
Eigen::MatrixXcd draw_sources(const Scenario& s, Rng& rng)
{
  const auto idx = s.true_indices();
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(static_cast<Index>(s.grid.size()), s.snapshots);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (Index l = 0; l < s.snapshots; ++l)
    for (std::size_t k = 0; k < idx.size(); ++k)
      x(idx[k], l) = std::polar(std::pow(10.0, s.amplitudes_db[k] / 20.0), phase(rng));
  return x;
}

/// sigma_w^2 = E||A X||_F^2 / (M L 10^(SNR/10)) with E||A X||_F^2 =
/// L sum_k 10^(dB_k/10) (unit-norm columns, independent uniform phases).
inline double calibrate_noise_variance(const std::vector<double>& amplitudes_db, Index sensors,
                                       double snr_db, Index snapshots = 1)
{
  double power = 0.0;
  for (double db : amplitudes_db)
    power += std::pow(10.0, db / 10.0);
  const double l = static_cast<double>(snapshots);
  return l * power / (static_cast<double>(sensors) * l * std::pow(10.0, snr_db / 10.0));
}

inline double calibrate_noise_variance(const Scenario& s)
{
  return calibrate_noise_variance(s.amplitudes_db, s.sensors, s.snr_db, s.snapshots);
}

namespace detail {

/// Residuals at rounding level (relative 64 eps) count as exact and map to
/// the floor.
inline double ratio_db(double residual, double reference)
{
  if (!(residual > 64.0 * std::numeric_limits<double>::epsilon() * reference))
    return nmse_floor_db;
  return std::max(10.0 * std::log10(residual / reference), nmse_floor_db);
}

}  // namespace detail

/// min_c 10 log10(||x - c x_hat|| / ||x||) over complex c. Note the norm
/// ratio is not squared.
inline double debiased_nmse_smv(const Eigen::VectorXcd& x, const Eigen::VectorXcd& x_hat)
{
  if (x.size() != x_hat.size())
    throw DimensionError("debiased_nmse_smv: length mismatch");
  const double ref = x.norm();
  if (!(ref > 0.0))
    throw InvalidArgument("debiased_nmse_smv: true signal is zero");
  const double energy = x_hat.squaredNorm();
  const cdouble c = energy > 0.0 ? x_hat.dot(x) / energy : cdouble(0.0);
  return detail::ratio_db((x - c * x_hat).norm(), ref);
}

/// min_c 10 log10(||X - diag(c) X_hat||_F / ||X||_F), one complex c per row.
inline double debiased_nmse_mmv(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& x_hat)
{
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw DimensionError("debiased_nmse_mmv: shape mismatch");
  const double ref = x.norm();
  if (!(ref > 0.0))
    throw InvalidArgument("debiased_nmse_mmv: true signal is zero");
  double residual2 = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double energy = x_hat.row(i).squaredNorm();
    const cdouble c = energy > 0.0 ? x_hat.row(i).dot(x.row(i)) / energy : cdouble(0.0);
    residual2 += (x.row(i) - c * x_hat.row(i)).squaredNorm();
  }
  return detail::ratio_db(std::sqrt(residual2), ref);
}

/// Exact set match between `support` and the true-DOA grid indices.
inline bool detection_success(const std::vector<Index>& support, const Scenario& s)
{
  if (static_cast<Index>(support.size()) != s.sources())
    throw InvalidArgument("detection_success: support size " + std::to_string(support.size()) +
                          " differs from K = " + std::to_string(s.sources()));
  auto truth = s.true_indices();
  auto found = support;
  std::sort(truth.begin(), truth.end());
  std::sort(found.begin(), found.end());
  return truth == found;
}

enum class AlgorithmKind { bsbl, biht };

/// One estimator in a comparison. `top_k_only` zeroes the estimate outside
/// its top-K rows before scoring. `mismatched_noise` runs BSBL with unit
/// noise variance instead of the calibrated one.
struct AlgorithmSpec
{
  std::string name;
  AlgorithmKind kind = AlgorithmKind::bsbl;
  bool top_k_only = false;
  bool mismatched_noise = false;
  SolverConfig bsbl;
  BihtConfig biht;

  /// Recognized ids: bsbl, bsbl-topk, bsbl-mismatched, bsbl-mismatched-topk, biht.
  static AlgorithmSpec from_id(const std::string& id)
  {
    AlgorithmSpec spec;
    spec.name = id;
    if (id == "bsbl") {
    } else if (id == "bsbl-topk") {
      spec.top_k_only = true;
    } else if (id == "bsbl-mismatched") {
      spec.mismatched_noise = true;
    } else if (id == "bsbl-mismatched-topk") {
      spec.mismatched_noise = true;
      spec.top_k_only = true;
    } else if (id == "biht") {
      spec.kind = AlgorithmKind::biht;
    } else {
      throw InvalidArgument("unknown algorithm '" + id + "'");
    }
    return spec;
  }

  /// Two specs with equal keys produce the same raw estimate on a trial.
  std::string solver_key() const
  {
    std::ostringstream key;
    key.precision(17);
    if (kind == AlgorithmKind::biht) {
      key << "biht/" << biht.sparsity << '/' << biht.tau << '/' << biht.iterations;
      return key.str();
    }
    key << "bsbl/" << mismatched_noise << '/' << bsbl.prior.a << '/' << bsbl.prior.b << '/'
        << bsbl.gamma << '/' << bsbl.iterations << '/' << bsbl.alpha_max << '/' << bsbl.jitter
        << '/' << bsbl.early_stop << '/' << bsbl.early_stop_tolerance << '/'
        << static_cast<int>(bsbl.covariance);
    if (bsbl.alpha_init)
      for (double v : *bsbl.alpha_init)
        key << ',' << v;
    return key.str();
  }
};

struct TrialResult
{
  std::string algorithm;
  int trial = 0;
  double snr_db = 0.0;
  Eigen::MatrixXcd estimate;  ///< G x L, after optional top-K restriction
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  bool detected = false;
  std::vector<Index> support;
  double runtime_s = 0.0;
  bool failed = false;
  std::string error;
};

struct AlgorithmSummary
{
  std::string algorithm;
  double snr_db = 0.0;
  double mean_nmse_db = std::numeric_limits<double>::quiet_NaN();
  double detection_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_runtime_s = std::numeric_limits<double>::quiet_NaN();
  int trials = 0;
  int failed = 0;
};

struct MonteCarloResult
{
  std::vector<TrialResult> trials;          ///< ordered by (trial, algorithm)
  std::vector<AlgorithmSummary> summary;    ///< one per algorithm, in input order
  std::map<std::string, std::vector<int>> bins;  ///< per-grid-point top-K tally
};

/// Independent stream for trial `trial` of a run seeded with `seed`.
inline std::mt19937_64 trial_rng(std::uint64_t seed, int trial)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), 0x0b5b1u};
  return std::mt19937_64(seq);
}

/// Draws sources and one-bit data for one trial and runs every algorithm on it.
inline std::vector<TrialResult> run_trial(const Scenario& s, const std::vector<AlgorithmSpec>& algorithms,
                                          const Eigen::MatrixXcd& dictionary, int trial,
                                          std::uint64_t seed)
{
  auto rng = trial_rng(seed, trial);
  const Eigen::MatrixXcd x = draw_sources(s, rng);
  const double sigma2 = calibrate_noise_variance(s);
  const ComplexLinearModel truth = ComplexLinearModel::white(dictionary, sigma2);
  const OneBitMeasurements y = synthesize(truth, x, rng);

  const RealStackedModel matched = stack_model(truth);
  const RealStackedModel unit = stack_model(ComplexLinearModel::white(dictionary, 1.0));
  const Index k = s.sources();

  struct Raw
  {
    Eigen::MatrixXcd estimate;
    double runtime_s = 0.0;
    std::string error;
  };
  std::map<std::string, Raw> cache;

  std::vector<TrialResult> out;
  for (const AlgorithmSpec& alg : algorithms) {
    TrialResult r;
    r.algorithm = alg.name;
    r.trial = trial;
    r.snr_db = s.snr_db;

    const std::string key = alg.solver_key();
    auto it = cache.find(key);
    if (it == cache.end()) {
      Raw raw;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (alg.kind == AlgorithmKind::biht) {
          if (s.snapshots != 1)
            throw InvalidArgument("biht supports a single snapshot only");
          BihtConfig cfg = alg.biht;
          cfg.sparsity = k;
          raw.estimate = biht_run(matched, y.snapshot(0), cfg).estimate;
        } else {
          const RealStackedModel& model = alg.mismatched_noise ? unit : matched;
          raw.estimate = s.snapshots == 1 ? run_smv(model, y.snapshot(0), alg.bsbl).estimate
                                          : run_mmv(model, y, alg.bsbl).estimate;
        }
      } catch (const NumericalBreakdown& e) {
        raw.error = e.what();
      }
      raw.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      it = cache.emplace(key, std::move(raw)).first;
    }

    const Raw& raw = it->second;
    r.runtime_s = raw.runtime_s;
    if (!raw.error.empty()) {
      r.failed = true;
      r.error = raw.error;
    } else {
      r.support = top_k_support(raw.estimate, k);
      r.estimate = alg.top_k_only ? restrict_rows(raw.estimate, r.support) : raw.estimate;
      r.nmse_db = s.snapshots == 1 ? debiased_nmse_smv(x.col(0), r.estimate.col(0))
                                   : debiased_nmse_mmv(x, r.estimate);
      r.detected = detection_success(r.support, s);
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Runs `n_trials` independent trials of scenario `s` (at s.snr_db).
/// Trials may run on up to `threads` workers; results are reduced in trial
/// order so the output does not depend on the worker count.
inline MonteCarloResult run_monte_carlo(const Scenario& s, const std::vector<AlgorithmSpec>& algorithms,
                                        int n_trials, std::uint64_t seed, unsigned threads = 1)
{
  s.validate();
  if (algorithms.empty())
    throw InvalidArgument("run_monte_carlo: no algorithms");
  if (n_trials < 1)
    throw InvalidArgument("run_monte_carlo: n_trials must be >= 1");
  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    if (algorithms[i].kind == AlgorithmKind::biht && s.snapshots != 1)
      throw InvalidArgument("run_monte_carlo: biht supports a single snapshot only");
    for (std::size_t j = 0; j < i; ++j)
      if (algorithms[i].name == algorithms[j].name)
        throw InvalidArgument("run_monte_carlo: duplicate algorithm '" + algorithms[i].name + "'");
  }

  const Eigen::MatrixXcd dictionary = build_dictionary(s.grid, s.sensors, s.d_over_lambda);
  std::vector<std::vector<TrialResult>> per_trial(static_cast<std::size_t>(n_trials));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < n_trials; t = next++)
      per_trial[static_cast<std::size_t>(t)] = run_trial(s, algorithms, dictionary, t, seed);
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_workers; ++i)
      pool.emplace_back(worker);
  }

  MonteCarloResult result;
  for (const auto& alg : algorithms)
    result.bins[alg.name].assign(s.grid.size(), 0);
  for (auto& rows : per_trial)
    for (auto& r : rows) {
      if (!r.failed)
        for (Index i : r.support)
          ++result.bins[r.algorithm][static_cast<std::size_t>(i)];
      result.trials.push_back(std::move(r));
    }

  for (const auto& alg : algorithms) {
    AlgorithmSummary sum;
    sum.algorithm = alg.name;
    sum.snr_db = s.snr_db;
    double nmse = 0.0, runtime = 0.0;
    int ok = 0, detected = 0;
    for (const auto& r : result.trials) {
      if (r.algorithm != alg.name)
        continue;
      ++sum.trials;
      if (r.failed) {
        ++sum.failed;
        continue;
      }
      ++ok;
      nmse += r.nmse_db;
      runtime += r.runtime_s;
      detected += r.detected;
    }
    if (ok > 0) {
      sum.mean_nmse_db = nmse / ok;
      sum.detection_rate = static_cast<double>(detected) / ok;
      sum.mean_runtime_s = runtime / ok;
    }
    result.summary.push_back(sum);
  }
  return result;
}

}  // namespace onebit
