#pragma once

// Binary sparse Bayesian learning for one-bit measurements.
//
// Each iteration linearizes sgn(A x + w) around the current Gaussian prior
// x ~ N(0, diag(1/alpha)) through its first two moments (arcsine law), computes
// the LMMSE posterior, damps it, and re-estimates alpha by EM.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "onebit/error.hpp"
#include "onebit/model.hpp"

#ifndef ONEBIT_ARCSINE_GAIN
#define ONEBIT_ARCSINE_GAIN (2.0 / std::numbers::pi)
#endif

namespace onebit {

/// Gain of the arcsine law C_y = g * arcsin(rho). Overridable at compile time
/// so the self-test can be checked against a mutated build.
inline constexpr double arcsine_gain = ONEBIT_ARCSINE_GAIN;

enum class CovarianceMode {
  full,      ///< keep the whole 2N x 2N posterior covariance
  diagonal,  ///< keep only its diagonal (all that the M-step reads)
};

struct Hyperprior
{
  double a = 1.0;  ///< Gamma shape
  double b = 0.0;  ///< Gamma rate
};

struct SolverConfig
{
  Hyperprior prior;
  double gamma = 0.6;
  int iterations = 500;
  /// Defaults to all-ones of length 2N.
  std::optional<Eigen::VectorXd> alpha_init;
  double alpha_max = 1e12;
  /// Ridge added to C_y on a failed factorization, relative to its mean diagonal.
  double jitter = 1e-9;
  bool early_stop = false;
  double early_stop_tolerance = 1e-8;
  CovarianceMode covariance = CovarianceMode::full;

  /// Throws InvalidArgument. `snapshots` enters the positivity check of the
  /// M-step numerator (L + 2a - 2).
  void validate(Index stacked_unknowns, Index snapshots) const
  {
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw InvalidArgument("SolverConfig: gamma must lie in (0, 1]");
    if (iterations < 1)
      throw InvalidArgument("SolverConfig: iterations must be >= 1");
    if (!(prior.b >= 0.0))
      throw InvalidArgument("SolverConfig: b must be >= 0");
    if (!(static_cast<double>(snapshots) + 2.0 * prior.a - 2.0 > 0.0))
      throw InvalidArgument("SolverConfig: L + 2a - 2 must be positive");
    if (!(alpha_max > 0.0))
      throw InvalidArgument("SolverConfig: alpha_max must be positive");
    if (!(jitter >= 0.0))
      throw InvalidArgument("SolverConfig: jitter must be >= 0");
    if (alpha_init) {
      if (alpha_init->size() != stacked_unknowns)
        throw DimensionError("SolverConfig: alpha_init has length " +
                             std::to_string(alpha_init->size()) + ", expected " +
                             std::to_string(stacked_unknowns));
      if (!(alpha_init->array() > 0.0).all())
        throw InvalidArgument("SolverConfig: alpha_init must be positive");
    }
  }
};

/// Posterior moments of the stacked unknowns. `means` is 2N x L; `covariance`
/// is 2N x 2N in full mode and empty in diagonal mode; `variances` is always
/// its diagonal.
struct Posterior
{
  Eigen::MatrixXd means;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd variances;
};

struct EStepOutput
{
  Posterior posterior;
  Eigen::MatrixXd cz;     ///< covariance of z = A x + w, 2M x 2M
  Eigen::MatrixXd cy;     ///< covariance of sgn(z), 2M x 2M
  Eigen::MatrixXd cross;  ///< E = Cov(sgn(z), x), 2M x 2N
};

namespace detail {

inline void symmetrize(Eigen::MatrixXd& m)
{
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
}

inline double condition_estimate(const Eigen::MatrixXd& sym)
{
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& l = eig.eigenvalues();
  const double lo = std::abs(l.minCoeff());
  return lo > 0.0 ? l.cwiseAbs().maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Linearized E-step for a fixed precision vector alpha.
///
/// C_z = A diag(1/alpha) A^T + C_w,  E = sqrt(2/pi) D^{-1/2} A diag(1/alpha),
/// C_y = (2/pi) arcsin(D^{-1/2} C_z D^{-1/2}) with D = diag(C_z), then
/// mu = E^T C_y^{-1} y and Sigma = diag(1/alpha) - E^T C_y^{-1} E.
/// C_y is only ever used through its Cholesky factor.
inline EStepOutput e_step(const RealStackedModel& model, const Eigen::VectorXd& alpha,
                          const OneBitMeasurements& y,
                          CovarianceMode mode = CovarianceMode::full, double jitter = 1e-9,
                          int iteration = 0)
{
  const Eigen::MatrixXd& a = model.matrix();
  if (alpha.size() != a.cols())
    throw DimensionError("e_step: alpha has length " + std::to_string(alpha.size()) +
                         ", expected " + std::to_string(a.cols()));
  if (y.length() != a.rows())
    throw DimensionError("e_step: measurements have length " + std::to_string(y.length()) +
                         ", expected " + std::to_string(a.rows()));
  if (!(alpha.array() > 0.0).all())
    throw InvalidArgument("e_step: alpha must be positive");

  EStepOutput out;
  const Eigen::VectorXd prior_var = alpha.cwiseInverse();

  const Eigen::MatrixXd scaled = a * prior_var.cwiseSqrt().asDiagonal();
  out.cz = model.noise_covariance();
  out.cz.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  detail::symmetrize(out.cz);

  const Eigen::VectorXd cz_diag = out.cz.diagonal();
  if (!(cz_diag.array() > 0.0).all())
    throw NumericalBreakdown(iteration, std::numeric_limits<double>::infinity());
  const Eigen::VectorXd inv_sd = cz_diag.cwiseSqrt().cwiseInverse();

  out.cross = std::sqrt(2.0 / std::numbers::pi) * inv_sd.asDiagonal() * a *
              prior_var.asDiagonal();

  Eigen::MatrixXd rho = inv_sd.asDiagonal() * out.cz * inv_sd.asDiagonal();
  // asin has infinite slope at 1, so a diagonal of 1 - eps would cost ~1e-8.
  rho.diagonal().setOnes();
  out.cy = rho.unaryExpr([](double r) { return arcsine_gain * std::asin(std::clamp(r, -1.0, 1.0)); });
  out.cy = 0.5 * (out.cy + out.cy.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(out.cy);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd ridged = out.cy;
    ridged.diagonal().array() += jitter * out.cy.diagonal().mean();
    llt.compute(ridged);
    if (llt.info() != Eigen::Success)
      throw NumericalBreakdown(iteration, detail::condition_estimate(out.cy));
  }

  // W = L^{-1} E, so E^T C_y^{-1} E = W^T W and E^T C_y^{-1} y = W^T L^{-1} y.
  const Eigen::MatrixXd w = llt.matrixL().solve(out.cross);
  const Eigen::MatrixXd v = llt.matrixL().solve(y.signs());

  Posterior& post = out.posterior;
  post.means.noalias() = w.transpose() * v;
  if (mode == CovarianceMode::full) {
    post.covariance = prior_var.asDiagonal();
    post.covariance.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), -1.0);
    detail::symmetrize(post.covariance);
    post.variances = post.covariance.diagonal();
  } else {
    post.variances = prior_var - w.colwise().squaredNorm().transpose();
  }
  return out;
}

/// gamma * fresh + (1 - gamma) * previous, applied to means and covariance.
inline Posterior damp(const Posterior& fresh, const Posterior& previous, double gamma)
{
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InvalidArgument("damp: gamma must lie in (0, 1]");
  if (fresh.means.rows() != previous.means.rows() || fresh.means.cols() != previous.means.cols() ||
      fresh.covariance.size() != previous.covariance.size())
    throw DimensionError("damp: posterior shapes differ");
  if (gamma == 1.0)
    return fresh;
  Posterior out;
  out.means = gamma * fresh.means + (1.0 - gamma) * previous.means;
  if (fresh.covariance.size() > 0) {
    out.covariance = gamma * fresh.covariance + (1.0 - gamma) * previous.covariance;
    out.variances = out.covariance.diagonal();
  } else {
    out.variances = gamma * fresh.variances + (1.0 - gamma) * previous.variances;
  }
  return out;
}

namespace detail {

inline double capped_ratio(double num, double den, double alpha_max)
{
  if (!(den > 0.0) || !std::isfinite(den))
    return alpha_max;
  return std::min(num / den, alpha_max);
}

}  // namespace detail

/// alpha_i = (2a - 1) / (2b + Sigma_ii + mu_i^2), capped at alpha_max.
inline Eigen::VectorXd m_step_smv(const Eigen::VectorXd& mean, const Eigen::VectorXd& variances,
                                  const Hyperprior& prior, double alpha_max = 1e12)
{
  if (mean.size() != variances.size())
    throw DimensionError("m_step_smv: mean and variance lengths differ");
  const double num = 2.0 * prior.a - 1.0;
  Eigen::VectorXd alpha(mean.size());
  for (Index i = 0; i < alpha.size(); ++i)
    alpha(i) = detail::capped_ratio(num, 2.0 * prior.b + variances(i) + mean(i) * mean(i),
                                    alpha_max);
  return alpha;
}

/// alpha_i = (L + 2a - 2) / (2b + L Sigma_ii + sum_l mu_{l,i}^2), capped at
/// alpha_max. `means` holds one column per snapshot.
inline Eigen::VectorXd m_step_mmv(const Eigen::MatrixXd& means, const Eigen::VectorXd& variances,
                                  const Hyperprior& prior, double alpha_max = 1e12)
{
  if (means.rows() != variances.size())
    throw DimensionError("m_step_mmv: mean and variance lengths differ");
  const double l = static_cast<double>(means.cols());
  const double num = l + 2.0 * prior.a - 2.0;
  const Eigen::VectorXd energy = means.rowwise().squaredNorm();
  Eigen::VectorXd alpha(means.rows());
  for (Index i = 0; i < alpha.size(); ++i)
    alpha(i) = detail::capped_ratio(num, 2.0 * prior.b + l * variances(i) + energy(i), alpha_max);
  return alpha;
}

/// Expected complete-data log-likelihood Q(alpha), without its constant,
/// summed over all 2N stacked components.
inline double q_value(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& means,
                      const Eigen::VectorXd& variances, const Hyperprior& prior)
{
  if (alpha.size() != means.rows() || alpha.size() != variances.size())
    throw DimensionError("q_value: length mismatch");
  const double l = static_cast<double>(means.cols());
  const Eigen::ArrayXd second_moment = l * variances.array() + means.rowwise().squaredNorm().array();
  const Eigen::ArrayXd log_alpha = alpha.array().log();
  return -0.5 * (alpha.array() * second_moment).sum() + 0.5 * l * log_alpha.sum() +
         ((prior.a - 1.0) * log_alpha - prior.b * alpha.array()).sum();
}

struct IterationRecord
{
  int iteration = 0;
  double mean_norm = 0.0;  ///< Frobenius norm of the damped means
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double q = 0.0;          ///< Q at the updated alpha
};

struct SolverState
{
  Eigen::VectorXd alpha;  ///< precisions for the next iteration
  Posterior damped;
  int iteration = 0;
};

struct BsblResult
{
  Eigen::MatrixXcd estimate;  ///< N x L complex damped posterior means
  SolverState state;
  std::vector<IterationRecord> trace;
};

namespace detail {

template <class MStep>
BsblResult run_bsbl(const RealStackedModel& model, const OneBitMeasurements& y,
                    const SolverConfig& config, MStep m_step)
{
  config.validate(model.cols(), y.snapshots());
  if (y.length() != model.rows())
    throw DimensionError("bsbl: measurements have length " + std::to_string(y.length()) +
                         ", expected " + std::to_string(model.rows()));

  BsblResult result;
  SolverState& state = result.state;
  state.alpha = config.alpha_init ? *config.alpha_init : Eigen::VectorXd::Ones(model.cols());
  result.trace.reserve(static_cast<std::size_t>(config.iterations));

  for (int t = 1; t <= config.iterations; ++t) {
    EStepOutput e = e_step(model, state.alpha, y, config.covariance, config.jitter, t);
    // The first posterior anchors the damping recursion.
    Posterior next = t == 1 ? std::move(e.posterior)
                            : damp(e.posterior, state.damped, config.gamma);

    bool converged = false;
    if (config.early_stop && t > 1) {
      const double prev = state.damped.means.norm();
      const double change = (next.means - state.damped.means).norm();
      converged = change <= config.early_stop_tolerance * std::max(prev, 1e-300);
    }

    state.damped = std::move(next);
    state.alpha = m_step(state.damped.means, state.damped.variances, config.prior,
                         config.alpha_max);
    state.iteration = t;

    IterationRecord rec;
    rec.iteration = t;
    rec.mean_norm = state.damped.means.norm();
    rec.alpha_min = state.alpha.minCoeff();
    rec.alpha_max = state.alpha.maxCoeff();
    rec.q = q_value(state.alpha, state.damped.means, state.damped.variances, config.prior);
    result.trace.push_back(rec);

    if (converged)
      break;
  }
  result.estimate = unstack_columns(state.damped.means);
  return result;
}

}  // namespace detail

/// Single-snapshot BSBL. The estimate has one column.
inline BsblResult run_smv(const RealStackedModel& model, const Eigen::VectorXd& y_bar,
                          const SolverConfig& config = {})
{
  return detail::run_bsbl(model, OneBitMeasurements(y_bar), config,
                          [](const Eigen::MatrixXd& means, const Eigen::VectorXd& var,
                             const Hyperprior& p, double cap) {
                            return m_step_smv(means.col(0), var, p, cap);
                          });
}

/// Multi-snapshot BSBL sharing one support (and one posterior covariance)
/// across the L columns of `y`.
inline BsblResult run_mmv(const RealStackedModel& model, const OneBitMeasurements& y,
                          const SolverConfig& config = {})
{
  return detail::run_bsbl(model, y, config,
                          [](const Eigen::MatrixXd& means, const Eigen::VectorXd& var,
                             const Hyperprior& p, double cap) {
                            return m_step_mmv(means, var, p, cap);
                          });
}

}  // namespace onebit
