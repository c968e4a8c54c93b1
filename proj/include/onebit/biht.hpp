#pragma once

// Binary iterative hard thresholding on the stacked real model, with hard
// thresholding counted in complex components.

#include <Eigen/Dense>

#include <optional>

#include "onebit/error.hpp"
#include "onebit/model.hpp"
#include "onebit/support.hpp"

namespace onebit {

struct BihtConfig
{
  Index sparsity = 1;  ///< K, in complex components
  double tau = 1.0;
  int iterations = 100;

  void validate(Index unknowns) const
  {
    if (sparsity < 1 || sparsity > unknowns)
      throw InvalidArgument("BihtConfig: K must lie in [1, " + std::to_string(unknowns) + "]");
    if (!(tau > 0.0))
      throw InvalidArgument("BihtConfig: tau must be positive");
    if (iterations < 1)
      throw InvalidArgument("BihtConfig: iterations must be >= 1");
  }
};

/// Keeps the K complex components (pairs i, i + N) of largest modulus.
inline Eigen::VectorXd hard_threshold_complex(const Eigen::VectorXd& x_bar, Index k)
{
  const Index n = x_bar.size() / 2;
  const Eigen::VectorXd modulus =
      (x_bar.head(n).array().square() + x_bar.tail(n).array().square()).sqrt();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x_bar.size());
  for (Index i : top_k_indices(modulus, k)) {
    out(i) = x_bar(i);
    out(i + n) = x_bar(i + n);
  }
  return out;
}

/// Number of stacked sign disagreements between sgn(A x) and y.
inline Index sign_mismatches(const RealStackedModel& model, const Eigen::VectorXd& x_bar,
                             const Eigen::VectorXd& y_bar)
{
  const Eigen::VectorXd z = model.matrix() * x_bar;
  Index count = 0;
  for (Index i = 0; i < z.size(); ++i)
    count += sgn(z(i)) != y_bar(i);
  return count;
}

struct BihtResult
{
  Eigen::VectorXcd estimate;       ///< unit l2 norm, exactly K nonzero components
  std::vector<Index> mismatches;   ///< sign mismatches after each iteration
};

/// x <- eta_K(x + (tau / 2) A^T (y - sgn(A x))), then normalized.
/// The default start is e_1, which avoids the all-zero fixed point of sgn.
inline BihtResult biht_run(const RealStackedModel& model, const Eigen::VectorXd& y_bar,
                           const BihtConfig& config,
                           const std::optional<Eigen::VectorXcd>& x0 = std::nullopt)
{
  const Index n = model.cols() / 2;
  config.validate(n);
  if (y_bar.size() != model.rows())
    throw DimensionError("biht_run: measurement length mismatch");
  if (!y_bar.unaryExpr([](double v) { return v == 1.0 || v == -1.0; }).all())
    throw InvalidArgument("biht_run: measurements must be +1 or -1");

  Eigen::VectorXd x_bar;
  if (x0) {
    if (x0->size() != n)
      throw DimensionError("biht_run: x0 length mismatch");
    x_bar = stack_vector(*x0);
  } else {
    x_bar = Eigen::VectorXd::Zero(2 * n);
    x_bar(0) = 1.0;
  }

  const Eigen::MatrixXd& a = model.matrix();
  BihtResult result;
  result.mismatches.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd residual =
        y_bar - (a * x_bar).unaryExpr([](double v) { return sgn(v); });
    x_bar = hard_threshold_complex(x_bar + 0.5 * config.tau * (a.transpose() * residual),
                                   config.sparsity);
    result.mismatches.push_back(sign_mismatches(model, x_bar, y_bar));
  }

  const double norm = x_bar.norm();
  if (norm > 0.0)
    x_bar /= norm;
  result.estimate = unstack_vector(x_bar);
  return result;
}

}  // namespace onebit
