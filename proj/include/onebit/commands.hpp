#pragma once

// Subcommands of the `onebit` tool: run, single, selftest.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "onebit/bsbl.hpp"
#include "onebit/doa.hpp"
#include "onebit/runspec.hpp"

namespace onebit {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_breakdown = 2 };

/// RFC 4180 writer: CRLF records, fields quoted only when needed.
class CsvWriter
{
public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  template <class... Fields>
  void row(const Fields&... fields)
  {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << field(fields)), ...);
    out_ << "\r\n";
  }

  static std::string field(const std::string& s)
  {
    if (s.find_first_of(",\"\r\n") == std::string::npos)
      return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"')
        q += '"';
      q += c;
    }
    return q + '"';
  }
  static std::string field(const char* s) { return field(std::string(s)); }
  static std::string field(bool b) { return b ? "1" : "0"; }
  static std::string field(int v) { return std::to_string(v); }
  static std::string field(long v) { return std::to_string(v); }
  static std::string field(long long v) { return std::to_string(v); }

  /// Shortest round-trip representation, '.' decimal, "nan" for NaN.
  static std::string field(double v)
  {
    if (std::isnan(v))
      return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }

private:
  std::ostream& out_;
};

namespace detail {

inline bool prepare_output(const std::filesystem::path& dir, std::ostream& err)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) {
      err << "error: output directory " << dir << " is not writable\n";
      return false;
    }
  }
  std::filesystem::remove(probe, ec);
  return true;
}

inline void print_summary(std::ostream& out, const std::vector<AlgorithmSummary>& rows)
{
  out << std::left << std::setw(22) << "algorithm" << std::right << std::setw(9) << "snr_db"
      << std::setw(14) << "nmse_db" << std::setw(11) << "detect" << std::setw(12) << "runtime_s"
      << std::setw(8) << "failed" << '\n';
  out << std::fixed;
  for (const auto& r : rows)
    out << std::left << std::setw(22) << r.algorithm << std::right << std::setw(9)
        << std::setprecision(1) << r.snr_db << std::setw(14) << std::setprecision(3)
        << r.mean_nmse_db << std::setw(11) << std::setprecision(3) << r.detection_rate
        << std::setw(12) << std::setprecision(3) << r.mean_runtime_s << std::setw(8) << r.failed
        << '\n';
  out << std::defaultfloat;
}

}  // namespace detail

/// Runs the Monte-Carlo sweep of `spec` and writes trials.csv, summary.csv
/// and bins.csv into spec.output. Bin counts are accumulated over the whole
/// SNR sweep.
inline int cmd_run(const RunSpec& spec, std::ostream& out, std::ostream& err)
{
  if (spec.algorithms.empty() || spec.snr_db.empty()) {
    err << "error: run spec needs at least one algorithm and one SNR\n";
    return exit_config;
  }
  if (!detail::prepare_output(spec.output, err))
    return exit_config;

  std::ofstream trials_file(spec.output / "trials.csv", std::ios::binary);
  std::ofstream summary_file(spec.output / "summary.csv", std::ios::binary);
  std::ofstream bins_file(spec.output / "bins.csv", std::ios::binary);
  CsvWriter trials(trials_file), summary(summary_file), bins(bins_file);
  trials.row("trial", "algorithm", "snr_db", "nmse_db", "detected", "runtime_s");
  summary.row("algorithm", "snr_db", "mean_nmse_db", "detection_rate", "mean_runtime_s", "n_failed");

  std::map<std::string, std::vector<int>> bin_total;
  std::vector<AlgorithmSummary> all;
  bool dead_cell = false;

  for (double snr : spec.snr_db) {
    Scenario s = spec.scenario;
    s.snr_db = snr;
    s.seed = spec.seed;
    MonteCarloResult mc;
    try {
      mc = run_monte_carlo(s, spec.algorithms, spec.trials, spec.seed, spec.threads);
    } catch (const std::invalid_argument& e) {
      err << "error: " << e.what() << '\n';
      return exit_config;
    }
    for (const auto& r : mc.trials)
      trials.row(r.trial, r.algorithm, r.snr_db, r.nmse_db, r.detected,
                 spec.record_runtime ? r.runtime_s : 0.0);
    for (auto& r : mc.summary) {
      if (!spec.record_runtime && !std::isnan(r.mean_runtime_s))
        r.mean_runtime_s = 0.0;
      summary.row(r.algorithm, r.snr_db, r.mean_nmse_db, r.detection_rate, r.mean_runtime_s,
                  r.failed);
      if (r.failed == r.trials) {
        dead_cell = true;
        err << "error: every trial of " << r.algorithm << " at " << snr
            << " dB hit a numerical breakdown\n";
      }
      all.push_back(r);
    }
    for (const auto& [name, counts] : mc.bins) {
      auto& total = bin_total[name];
      total.resize(counts.size(), 0);
      for (std::size_t i = 0; i < counts.size(); ++i)
        total[i] += counts[i];
    }
  }

  bins.row("algorithm", "angle_deg", "count");
  for (const auto& alg : spec.algorithms) {
    const auto& counts = bin_total[alg.name];
    for (std::size_t i = 0; i < counts.size(); ++i)
      bins.row(alg.name, spec.scenario.grid[i], counts[i]);
  }

  detail::print_summary(out, all);
  return dead_cell ? exit_breakdown : exit_ok;
}

/// One seeded realization at the first SNR of the sweep. With
/// `emit_spectrum`, writes spectrum.csv (algorithm, angle_deg, magnitude,
/// top_k, true_doa) into spec.output.
inline int cmd_single(const RunSpec& spec, bool emit_spectrum, std::ostream& out, std::ostream& err)
{
  if (spec.algorithms.empty() || spec.snr_db.empty()) {
    err << "error: run spec needs at least one algorithm and one SNR\n";
    return exit_config;
  }
  Scenario s = spec.scenario;
  s.snr_db = spec.snr_db.front();
  s.seed = spec.seed;
  std::vector<TrialResult> results;
  try {
    s.validate();
    const Eigen::MatrixXcd dictionary = build_dictionary(s.grid, s.sensors, s.d_over_lambda);
    results = run_trial(s, spec.algorithms, dictionary, 0, spec.seed);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  bool any_ok = false;
  for (const auto& r : results) {
    out << r.algorithm << ": ";
    if (r.failed) {
      out << "failed (" << r.error << ")\n";
      continue;
    }
    any_ok = true;
    out << "nmse_db=" << r.nmse_db << " detected=" << (r.detected ? "yes" : "no") << " top-K at";
    for (Index i : r.support)
      out << ' ' << s.grid[static_cast<std::size_t>(i)];
    out << " deg\n";
  }

  if (emit_spectrum) {
    if (!detail::prepare_output(spec.output, err))
      return exit_config;
    std::ofstream file(spec.output / "spectrum.csv", std::ios::binary);
    CsvWriter csv(file);
    csv.row("algorithm", "angle_deg", "magnitude", "top_k", "true_doa");
    auto truth = s.true_indices();
    for (const auto& r : results) {
      if (r.failed)
        continue;
      const Eigen::VectorXd mag = r.estimate.rowwise().norm();
      for (Index i = 0; i < mag.size(); ++i) {
        const bool top = std::find(r.support.begin(), r.support.end(), i) != r.support.end();
        const bool real = std::find(truth.begin(), truth.end(), i) != truth.end();
        csv.row(r.algorithm, s.grid[static_cast<std::size_t>(i)], mag(i), top, real);
      }
    }
    out << "wrote " << (spec.output / "spectrum.csv").string() << '\n';
  }
  return any_ok ? exit_ok : exit_breakdown;
}

/// Closed-form and algebraic checks of the BSBL core. Nonzero on any failure.
inline int cmd_selftest(std::ostream& out)
{
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    failures += ok ? 0 : 1;
  };
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::setprecision(3) << std::scientific << v;
    return s.str();
  };

  // x, w iid N(0, 1), y = sgn(x + w): E[x | y = 1] = 1/sqrt(pi), Var = 1 - 1/pi.
  {
    const RealStackedModel m(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
    const auto e = e_step(m, Eigen::VectorXd::Ones(1), OneBitMeasurements(Eigen::MatrixXd::Ones(1, 1)));
    const double err_mean = std::abs(e.posterior.means(0, 0) - 1.0 / std::sqrt(std::numbers::pi));
    const double err_var = std::abs(e.posterior.variances(0) - (1.0 - 1.0 / std::numbers::pi));
    report("scalar-oracle", err_mean < 1e-12 && err_var < 1e-12,
           "mean err " + fmt(err_mean) + ", variance err " + fmt(err_var));
  }

  // C_z = [[1, .5], [.5, 1]] gives C_y = [[1, 1/3], [1/3, 1]].
  {
    Eigen::MatrixXd noise(2, 2);
    noise << 0.5, 0.5, 0.5, 0.5;
    const RealStackedModel m(Eigen::MatrixXd::Identity(2, 2), noise);
    const auto e = e_step(m, Eigen::VectorXd::Constant(2, 2.0),
                          OneBitMeasurements(Eigen::MatrixXd::Ones(2, 1)));
    Eigen::MatrixXd expected(2, 2);
    expected << 1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0;
    const double err = (e.cy - expected).cwiseAbs().maxCoeff();
    report("arcsine-law", err < 1e-12, "max err " + fmt(err));
  }

  // Fixed random instance shared by the two iteration checks.
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> normal;
  const Index m_rows = 6, n_cols = 10;
  Eigen::MatrixXcd a(m_rows, n_cols);
  for (Index i = 0; i < a.size(); ++i)
    a(i) = cdouble(normal(rng), normal(rng)) / std::sqrt(2.0 * m_rows);
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(n_cols, 1);
  x(2, 0) = cdouble(1.5, -0.5);
  x(7, 0) = cdouble(-0.8, 1.1);
  const ComplexLinearModel complex_model = ComplexLinearModel::white(a, 0.1);
  const RealStackedModel model = stack_model(complex_model);
  const OneBitMeasurements y = synthesize(complex_model, x, rng);

  {
    const double s = 4.0;
    SolverConfig base;
    base.iterations = 25;
    SolverConfig scaled = base;
    scaled.alpha_init = Eigen::VectorXd::Constant(model.cols(), s);
    const auto r1 = run_smv(model, y.snapshot(0), base);
    const auto r2 = run_smv(model.with_noise_scaled(1.0 / s), y.snapshot(0), scaled);
    const double err_mu = (r2.estimate * std::sqrt(s) - r1.estimate).norm() / r1.estimate.norm();
    const double err_alpha =
        ((r2.state.alpha / s - r1.state.alpha).array() / r1.state.alpha.array()).abs().maxCoeff();
    report("joint-rescaling", err_mu < 1e-8 && err_alpha < 1e-8,
           "mean rel err " + fmt(err_mu) + ", alpha rel err " + fmt(err_alpha));
  }

  {
    SolverConfig cfg;
    cfg.iterations = 25;
    const auto smv = run_smv(model, y.snapshot(0), cfg);
    const auto mmv = run_mmv(model, y, cfg);
    const double err = (smv.estimate - mmv.estimate).cwiseAbs().maxCoeff();
    report("mmv-l1-equals-smv", err < 1e-12, "max err " + fmt(err));
  }

  out << (failures == 0 ? "selftest passed" : "selftest FAILED") << '\n';
  return failures == 0 ? 0 : 1;
}

}  // namespace onebit
