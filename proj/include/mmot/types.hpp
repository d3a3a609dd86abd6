#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <vector>

namespace mmot {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// One atom index per marginal axis.
using IndexTuple = std::vector<Index>;

/// Sentinel for a tuple whose cost is singular (coincident Coulomb charges).
template <typename Scalar = double>
constexpr Scalar infinite_cost() {
  return std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
bool is_finite_cost(Scalar c) {
  return c < std::numeric_limits<Scalar>::infinity();
}

}  // namespace mmot
