#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "onebit/error.hpp"

namespace onebit {

/// Indices of the K largest entries of `magnitudes`, returned in ascending
/// index order. Ties go to the lower index.
inline std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& magnitudes, Eigen::Index k)
{
  if (k < 0 || k > magnitudes.size())
    throw InvalidArgument("top_k: K must lie in [0, " + std::to_string(magnitudes.size()) + "]");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(magnitudes.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return magnitudes(i) > magnitudes(j);
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

/// Top-K rows of an N x L estimate ranked by row l2 norm. For L = 1 this is
/// the K largest |x_i|.
inline std::vector<Eigen::Index> top_k_support(const Eigen::MatrixXcd& estimate, Eigen::Index k)
{
  return top_k_indices(estimate.rowwise().norm(), k);
}

/// Copy of `estimate` with every row outside `support` zeroed.
inline Eigen::MatrixXcd restrict_rows(const Eigen::MatrixXcd& estimate,
                                      const std::vector<Eigen::Index>& support)
{
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(estimate.rows(), estimate.cols());
  for (Eigen::Index i : support)
    out.row(i) = estimate.row(i);
  return out;
}

}  // namespace onebit
