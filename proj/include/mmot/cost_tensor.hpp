#pragma once

#include "mmot/costs.hpp"
#include "mmot/coupling.hpp"

#include <functional>
#include <vector>

namespace mmot {

inline constexpr Index kDefaultTensorCap = 2'000'000;

/// Dense cost table over the product of N supports, last axis fastest.
/// Entries may hold the infinite-cost sentinel.
class CostTensor {
 public:
  CostTensor() = default;
  CostTensor(std::vector<Index> shape, Vector values);

  Index order() const { return static_cast<Index>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  Index size() const { return values_.size(); }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  Index flat_index(const IndexTuple& tuple) const;
  IndexTuple tuple(Index flat) const;

  double operator()(const IndexTuple& t) const { return values_[flat_index(t)]; }
  double operator[](Index flat) const { return values_[flat]; }

  bool is_finite(Index flat) const { return is_finite_cost(values_[flat]); }
  Index finite_count() const;
  /// Smallest and largest finite entries; both zero if none is finite.
  double min_finite() const;
  double max_finite() const;

 private:
  std::vector<Index> shape_;
  std::vector<Index> strides_;
  Vector values_;
};

/// Product of support sizes, throwing std::length_error once it exceeds `cap`.
Index checked_product_size(const std::vector<Measure>& marginals, Index cap = kDefaultTensorCap);

/// Tabulates f(z) over every tuple, z being the d x N matrix of tuple points.
CostTensor tabulate(const std::vector<Measure>& marginals,
                    const std::function<double(const Matrix&)>& f, Index cap = kDefaultTensorCap);

/// Cost table of a family on the given per-axis marginals.
CostTensor cost_tensor(const CostSpec& spec, const std::vector<Measure>& marginals,
                       Index cap = kDefaultTensorCap);

/// Pointwise cost of a family on a d x N tuple matrix.
double evaluate_cost(const CostSpec& spec, const Matrix& z);

/// Integral of the tabulated cost against a coupling on the same supports;
/// +inf if the coupling charges a sentinel entry.
double expected_cost(const Coupling& gamma, const CostTensor& cost);

}  // namespace mmot
