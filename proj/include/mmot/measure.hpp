#pragma once

#include "mmot/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmot {

/// Tolerance on total mass accepted (and then renormalized away) at construction.
inline constexpr double kMassTolerance = 1e-12;

/// Finitely supported probability measure on R^d.
///
/// Points are stored column-wise (d x n). Construction merges repeated points
/// (summing their weights, keeping first-occurrence order) and renormalizes
/// weights whose total is within kMassTolerance of one. Anything further from
/// one is rejected; use normalized() for raw nonnegative masses.
template <typename Scalar>
class DiscreteMeasure {
 public:
  using Point = VectorX<Scalar>;
  using Points = MatrixX<Scalar>;
  using Weights = VectorX<Scalar>;

  /// Dirac mass at the origin of R^1.
  DiscreteMeasure() : points_(Points::Zero(1, 1)), weights_(Weights::Ones(1)) {}

  DiscreteMeasure(const Points& points, const Weights& weights) {
    if (points.rows() < 1) throw std::invalid_argument("measure: dimension must be >= 1");
    if (points.cols() < 1) throw std::invalid_argument("measure: needs at least one atom");
    if (points.cols() != weights.size())
      throw std::invalid_argument("measure: " + std::to_string(points.cols()) + " points but " +
                                  std::to_string(weights.size()) + " weights");
    if (!points.allFinite()) throw std::invalid_argument("measure: non-finite point coordinate");
    for (Index i = 0; i < weights.size(); ++i) {
      if (!std::isfinite(static_cast<double>(weights[i])) || weights[i] < Scalar(0))
        throw std::invalid_argument("measure: weight " + std::to_string(i) +
                                    " is negative or non-finite");
    }
    const Scalar total = weights.sum();
    if (std::abs(static_cast<double>(total) - 1.0) > kMassTolerance)
      throw std::invalid_argument("measure: weights sum to " +
                                  std::to_string(static_cast<double>(total)) + ", expected 1");
    merge(points, weights / total);
  }

  /// Builds a probability measure from arbitrary nonnegative masses.
  static DiscreteMeasure normalized(const Points& points, const Weights& masses) {
    const Scalar total = masses.sum();
    if (!(total > Scalar(0))) throw std::invalid_argument("measure: total mass must be positive");
    return DiscreteMeasure(points, masses / total);
  }

  static DiscreteMeasure dirac(const Point& at) {
    return DiscreteMeasure(Points(at), Weights::Ones(1));
  }

  Index dim() const { return points_.rows(); }
  Index size() const { return points_.cols(); }

  const Points& points() const { return points_; }
  const Weights& weights() const { return weights_; }
  auto point(Index i) const { return points_.col(i); }
  Scalar weight(Index i) const { return weights_[i]; }

  /// Index of an atom exactly equal to `p`, if any.
  template <typename Derived>
  std::optional<Index> find(const Eigen::MatrixBase<Derived>& p) const {
    for (Index i = 0; i < size(); ++i)
      if (points_.col(i) == p) return i;
    return std::nullopt;
  }

  /// True when exactly one atom carries positive mass.
  bool is_dirac() const { return (weights_.array() > Scalar(0)).count() == 1; }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return a.points_ == b.points_ && a.weights_ == b.weights_;
  }

 private:
  void merge(const Points& points, const Weights& weights) {
    std::map<std::vector<Scalar>, Index> seen;
    std::vector<Index> first;
    std::vector<Scalar> mass;
    for (Index i = 0; i < points.cols(); ++i) {
      std::vector<Scalar> key(points.col(i).data(), points.col(i).data() + points.rows());
      auto [it, inserted] = seen.emplace(std::move(key), static_cast<Index>(first.size()));
      if (inserted) {
        first.push_back(i);
        mass.push_back(weights[i]);
      } else {
        mass[it->second] += weights[i];
      }
    }
    points_.resize(points.rows(), static_cast<Index>(first.size()));
    weights_.resize(static_cast<Index>(first.size()));
    for (std::size_t k = 0; k < first.size(); ++k) {
      points_.col(static_cast<Index>(k)) = points.col(first[k]);
      weights_[static_cast<Index>(k)] = mass[k];
    }
  }

  Points points_;
  Weights weights_;
};

using Measure = DiscreteMeasure<double>;

/// y -> (-2 y^1, y^2, ..., y^d): attraction along the molecular axis, repulsion across it.
template <typename Derived>
VectorX<typename Derived::Scalar> star(const Eigen::MatrixBase<Derived>& v) {
  VectorX<typename Derived::Scalar> out = v;
  if (out.size() < 1) throw std::invalid_argument("star: empty vector");
  out[0] *= typename Derived::Scalar(-2);
  return out;
}

template <typename Scalar, typename Derived>
DiscreteMeasure<Scalar> translate(const DiscreteMeasure<Scalar>& m,
                                  const Eigen::MatrixBase<Derived>& shift) {
  if (shift.size() != m.dim())
    throw std::invalid_argument("translate: shift has dimension " + std::to_string(shift.size()) +
                                ", measure has " + std::to_string(m.dim()));
  MatrixX<Scalar> moved = m.points().colwise() + shift.template cast<Scalar>();
  return DiscreteMeasure<Scalar>(moved, m.weights());
}

/// Offset e1/(2 eta) of molecule alpha; beta sits at the negative of it.
template <typename Scalar>
VectorX<Scalar> molecule_offset(Index d, Scalar eta) {
  if (!(eta > Scalar(0))) throw std::invalid_argument("eta must be positive");
  VectorX<Scalar> r = VectorX<Scalar>::Zero(d);
  r[0] = Scalar(1) / (Scalar(2) * eta);
  return r;
}

/// Convex combination sum_k c_k m_k over the union of supports.
template <typename Scalar>
DiscreteMeasure<Scalar> mixture(const std::vector<DiscreteMeasure<Scalar>>& parts,
                                const std::vector<Scalar>& coefficients) {
  if (parts.empty() || parts.size() != coefficients.size())
    throw std::invalid_argument("mixture: need one coefficient per measure");
  const Index d = parts.front().dim();
  Index n = 0;
  for (const auto& p : parts) {
    if (p.dim() != d) throw std::invalid_argument("mixture: dimension mismatch");
    n += p.size();
  }
  MatrixX<Scalar> points(d, n);
  VectorX<Scalar> weights(n);
  Index at = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    points.middleCols(at, parts[k].size()) = parts[k].points();
    weights.segment(at, parts[k].size()) = coefficients[k] * parts[k].weights();
    at += parts[k].size();
  }
  return DiscreteMeasure<Scalar>(points, weights);
}

/// Single-particle density of the two-molecule system at separation 1/eta:
/// (Na rho_a(. - r_a) + Nb rho_b(. - r_b)) / (Na + Nb), r_a = e1/(2 eta) = -r_b.
template <typename Scalar>
DiscreteMeasure<Scalar> mixture_rho_eta(const DiscreteMeasure<Scalar>& rho_alpha,
                                        const DiscreteMeasure<Scalar>& rho_beta, int n_alpha,
                                        int n_beta, Scalar eta) {
  if (!(eta > Scalar(0))) throw std::invalid_argument("mixture_rho_eta: eta must be positive");
  if (n_alpha < 1 || n_beta < 1)
    throw std::invalid_argument("mixture_rho_eta: electron counts must be >= 1");
  if (rho_alpha.dim() != rho_beta.dim())
    throw std::invalid_argument("mixture_rho_eta: dimension mismatch");
  const VectorX<Scalar> r = molecule_offset(rho_alpha.dim(), eta);
  const Scalar n = Scalar(n_alpha + n_beta);
  return mixture<Scalar>({translate(rho_alpha, r), translate(rho_beta, VectorX<Scalar>(-r))},
                         {Scalar(n_alpha) / n, Scalar(n_beta) / n});
}

template <typename Scalar>
VectorX<Scalar> mean(const DiscreteMeasure<Scalar>& m) {
  return m.points() * m.weights();
}

template <typename Scalar>
Scalar first_coordinate_mean(const DiscreteMeasure<Scalar>& m) {
  return m.points().row(0).dot(m.weights());
}

/// Integral of |x|^2.
template <typename Scalar>
Scalar second_moment(const DiscreteMeasure<Scalar>& m) {
  return m.points().colwise().squaredNorm().dot(m.weights());
}

/// Integral of (x^1)^2.
template <typename Scalar>
Scalar first_coordinate_second_moment(const DiscreteMeasure<Scalar>& m) {
  return m.points().row(0).array().square().matrix().dot(m.weights());
}

/// Largest weight discrepancy between two measures, matching atoms by exact
/// position; an atom missing on one side counts with weight zero there.
template <typename Scalar>
Scalar max_abs_deviation(const DiscreteMeasure<Scalar>& a, const DiscreteMeasure<Scalar>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("max_abs_deviation: dimension mismatch");
  Scalar worst(0);
  for (Index i = 0; i < a.size(); ++i) {
    const auto j = b.find(a.point(i));
    worst = std::max<Scalar>(worst, std::abs(a.weight(i) - (j ? b.weight(*j) : Scalar(0))));
  }
  for (Index j = 0; j < b.size(); ++j)
    if (!a.find(b.point(j))) worst = std::max<Scalar>(worst, b.weight(j));
  return worst;
}

}  // namespace mmot
