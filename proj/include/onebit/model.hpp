#pragma once

// One-bit observation model y = csgn(A x + w) and its real-valued stacking.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "onebit/error.hpp"

namespace onebit {

using Index = Eigen::Index;
using cdouble = std::complex<double>;

/// Real sign with the convention sgn(0) = +1.
inline double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

/// Componentwise complex sign: sgn(Re r) + j sgn(Im r).
inline Eigen::VectorXcd csgn(const Eigen::VectorXcd& r)
{
  return r.unaryExpr([](const cdouble& z) { return cdouble(sgn(z.real()), sgn(z.imag())); });
}

/// [Re x; Im x].
inline Eigen::VectorXd stack_vector(const Eigen::VectorXcd& x)
{
  Eigen::VectorXd out(2 * x.size());
  out << x.real(), x.imag();
  return out;
}

inline Eigen::VectorXcd unstack_vector(const Eigen::VectorXd& v)
{
  if (v.size() % 2 != 0)
    throw DimensionError("unstack_vector: odd length " + std::to_string(v.size()));
  const Index n = v.size() / 2;
  Eigen::VectorXcd out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

/// Column-wise stacking of an N x L complex matrix into 2N x L.
inline Eigen::MatrixXd stack_columns(const Eigen::MatrixXcd& x)
{
  Eigen::MatrixXd out(2 * x.rows(), x.cols());
  out.topRows(x.rows()) = x.real();
  out.bottomRows(x.rows()) = x.imag();
  return out;
}

inline Eigen::MatrixXcd unstack_columns(const Eigen::MatrixXd& v)
{
  if (v.rows() % 2 != 0)
    throw DimensionError("unstack_columns: odd row count " + std::to_string(v.rows()));
  const Index n = v.rows() / 2;
  Eigen::MatrixXcd out(n, v.cols());
  out.real() = v.topRows(n);
  out.imag() = v.bottomRows(n);
  return out;
}

/// [[Re B, -Im B], [Im B, Re B]].
inline Eigen::MatrixXd real_block(const Eigen::MatrixXcd& b)
{
  const Index r = b.rows(), c = b.cols();
  Eigen::MatrixXd out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = b.real();
  out.topRightCorner(r, c) = -b.imag();
  out.bottomLeftCorner(r, c) = b.imag();
  out.bottomRightCorner(r, c) = b.real();
  return out;
}

/// Complex measurement matrix A (M x N) with circular symmetric noise
/// covariance C_w (M x M, Hermitian PSD).
class ComplexLinearModel
{
public:
  static constexpr double hermitian_tolerance = 1e-12;

  ComplexLinearModel(Eigen::MatrixXcd a, Eigen::MatrixXcd noise_cov)
    : a_(std::move(a)), noise_cov_(std::move(noise_cov))
  {
    if (noise_cov_.rows() != a_.rows() || noise_cov_.cols() != a_.rows())
      throw DimensionError("ComplexLinearModel: noise covariance must be " +
                           std::to_string(a_.rows()) + "x" + std::to_string(a_.rows()));
    if ((noise_cov_ - noise_cov_.adjoint()).cwiseAbs().maxCoeff() > hermitian_tolerance)
      throw InvalidArgument("ComplexLinearModel: noise covariance is not Hermitian");
  }

  /// White noise C_w = sigma2 * I.
  static ComplexLinearModel white(Eigen::MatrixXcd a, double sigma2)
  {
    const Index m = a.rows();
    return ComplexLinearModel(std::move(a),
                              sigma2 * Eigen::MatrixXcd::Identity(m, m));
  }

  const Eigen::MatrixXcd& matrix() const { return a_; }
  const Eigen::MatrixXcd& noise_covariance() const { return noise_cov_; }
  Index measurements() const { return a_.rows(); }
  Index unknowns() const { return a_.cols(); }

private:
  Eigen::MatrixXcd a_;
  Eigen::MatrixXcd noise_cov_;
};

/// Real 2M x 2N form of a ComplexLinearModel. Any real model is accepted;
/// only unstacking an estimate needs even dimensions.
class RealStackedModel
{
public:
  RealStackedModel(Eigen::MatrixXd a_bar, Eigen::MatrixXd noise_cov_bar)
    : a_bar_(std::move(a_bar)), noise_cov_bar_(std::move(noise_cov_bar))
  {
    if (noise_cov_bar_.rows() != a_bar_.rows() || noise_cov_bar_.cols() != a_bar_.rows())
      throw DimensionError("RealStackedModel: noise covariance must be " +
                           std::to_string(a_bar_.rows()) + "x" + std::to_string(a_bar_.rows()));
    if ((noise_cov_bar_ - noise_cov_bar_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("RealStackedModel: noise covariance is not symmetric");
  }

  const Eigen::MatrixXd& matrix() const { return a_bar_; }
  const Eigen::MatrixXd& noise_covariance() const { return noise_cov_bar_; }
  Index rows() const { return a_bar_.rows(); }
  Index cols() const { return a_bar_.cols(); }

  /// Same matrix, noise covariance multiplied by `factor`.
  RealStackedModel with_noise_scaled(double factor) const
  {
    return RealStackedModel(a_bar_, factor * noise_cov_bar_);
  }

private:
  Eigen::MatrixXd a_bar_;
  Eigen::MatrixXd noise_cov_bar_;
};

inline RealStackedModel stack_model(const ComplexLinearModel& m)
{
  return RealStackedModel(real_block(m.matrix()), 0.5 * real_block(m.noise_covariance()));
}

/// Sign measurements in stacked real form: one 2M column per snapshot,
/// every entry exactly +1 or -1.
class OneBitMeasurements
{
public:
  explicit OneBitMeasurements(Eigen::MatrixXd signs) : signs_(std::move(signs))
  {
    if (signs_.cols() < 1)
      throw DimensionError("OneBitMeasurements: need at least one snapshot");
    if (!signs_.unaryExpr([](double v) { return v == 1.0 || v == -1.0; }).all())
      throw InvalidArgument("OneBitMeasurements: entries must be +1 or -1");
  }

  /// From complex measurements with entries in {+-1 +-1j}.
  static OneBitMeasurements from_complex(const Eigen::MatrixXcd& y)
  {
    return OneBitMeasurements(stack_columns(y));
  }

  const Eigen::MatrixXd& signs() const { return signs_; }
  Eigen::VectorXd snapshot(Index l) const { return signs_.col(l); }
  Index snapshots() const { return signs_.cols(); }
  Index length() const { return signs_.rows(); }
  Eigen::MatrixXcd to_complex() const { return unstack_columns(signs_); }

private:
  Eigen::MatrixXd signs_;
};

namespace detail {

/// Square root factor R with R R^T = C for a symmetric PSD C.
inline Eigen::MatrixXd psd_root(const Eigen::MatrixXd& c)
{
  const Eigen::MatrixXd off = c - Eigen::MatrixXd(c.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    if ((c.diagonal().array() < 0.0).any())
      throw InvalidArgument("synthesize: noise covariance is not PSD");
    return c.diagonal().cwiseSqrt().asDiagonal();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-12 * scale)
    throw InvalidArgument("synthesize: noise covariance is not PSD");
  return eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// Draws Y = csgn(A X + W) with W columns iid CN(0, C_w). X is N x L.
template <class Rng>
OneBitMeasurements synthesize(const ComplexLinearModel& m, const Eigen::MatrixXcd& x, Rng& rng)
{
  if (x.rows() != m.unknowns())
    throw DimensionError("synthesize: signal has " + std::to_string(x.rows()) +
                         " rows, model expects " + std::to_string(m.unknowns()));
  const RealStackedModel stacked = stack_model(m);
  const Eigen::MatrixXd root = detail::psd_root(stacked.noise_covariance());

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd white(stacked.rows(), x.cols());
  for (Index l = 0; l < white.cols(); ++l)
    for (Index i = 0; i < white.rows(); ++i)
      white(i, l) = normal(rng);

  Eigen::MatrixXd z = stacked.matrix() * stack_columns(x);
  z.noalias() += root * white;
  return OneBitMeasurements(z.unaryExpr([](double v) { return sgn(v); }));
}

}  // namespace onebit
