#pragma once

#include "mmot/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmot {

/// Exact symmetrization enumerates all N! permutations; beyond this it is refused.
inline constexpr int kMaxSymmetrizeOrder = 6;

template <typename Scalar>
struct CouplingEntry {
  IndexTuple tuple;
  Scalar mass;
};

/// Sparse joint probability over the product of N discrete supports.
///
/// `axes` are the declared marginals; entry tuples index into their supports.
/// Repeated tuples are merged and zero-mass entries dropped at construction,
/// and entries are kept in lexicographic tuple order.
template <typename Scalar>
class CouplingTensor {
 public:
  using Entry = CouplingEntry<Scalar>;

  CouplingTensor(std::vector<DiscreteMeasure<Scalar>> axes, std::vector<Entry> entries)
      : axes_(std::move(axes)) {
    if (axes_.empty()) throw std::invalid_argument("coupling: needs at least one axis");
    std::map<IndexTuple, Scalar> merged;
    for (auto& e : entries) {
      if (e.tuple.size() != axes_.size())
        throw std::invalid_argument("coupling: tuple length " + std::to_string(e.tuple.size()) +
                                    " does not match " + std::to_string(axes_.size()) + " axes");
      for (std::size_t k = 0; k < axes_.size(); ++k)
        if (e.tuple[k] < 0 || e.tuple[k] >= axes_[k].size())
          throw std::out_of_range("coupling: atom index out of range on axis " +
                                  std::to_string(k));
      if (!(e.mass >= Scalar(0)) || !std::isfinite(static_cast<double>(e.mass)))
        throw std::invalid_argument("coupling: negative or non-finite mass");
      if (e.mass > Scalar(0)) merged[e.tuple] += e.mass;
    }
    entries_.reserve(merged.size());
    Scalar total(0);
    for (auto& [tuple, mass] : merged) {
      entries_.push_back({tuple, mass});
      total += mass;
    }
    if (std::abs(static_cast<double>(total) - 1.0) > kMassTolerance)
      throw std::invalid_argument("coupling: total mass " +
                                  std::to_string(static_cast<double>(total)) + ", expected 1");
  }

  Index order() const { return static_cast<Index>(axes_.size()); }
  Index dim() const { return axes_.front().dim(); }
  const std::vector<DiscreteMeasure<Scalar>>& axes() const { return axes_; }
  const DiscreteMeasure<Scalar>& axis(Index k) const { return axes_.at(static_cast<std::size_t>(k)); }
  const std::vector<Entry>& entries() const { return entries_; }

  Scalar total_mass() const {
    Scalar total(0);
    for (const auto& e : entries_) total += e.mass;
    return total;
  }

  /// Support points of one entry as a d x N matrix.
  MatrixX<Scalar> gather(const IndexTuple& tuple) const {
    MatrixX<Scalar> z(dim(), order());
    for (Index k = 0; k < order(); ++k) z.col(k) = axes_[static_cast<std::size_t>(k)].point(tuple[static_cast<std::size_t>(k)]);
    return z;
  }

 private:
  std::vector<DiscreteMeasure<Scalar>> axes_;
  std::vector<Entry> entries_;
};

using Coupling = CouplingTensor<double>;

/// Weights of the i-th marginal, aligned with the i-th axis support.
template <typename Scalar>
VectorX<Scalar> marginal_weights(const CouplingTensor<Scalar>& gamma, Index i) {
  if (i < 0 || i >= gamma.order())
    throw std::out_of_range("marginal: axis " + std::to_string(i) + " out of range");
  VectorX<Scalar> w = VectorX<Scalar>::Zero(gamma.axis(i).size());
  for (const auto& e : gamma.entries()) w[e.tuple[static_cast<std::size_t>(i)]] += e.mass;
  return w;
}

template <typename Scalar>
DiscreteMeasure<Scalar> marginal(const CouplingTensor<Scalar>& gamma, Index i) {
  return DiscreteMeasure<Scalar>::normalized(gamma.axis(i).points(), marginal_weights(gamma, i));
}

/// Largest deviation of any computed marginal from its declared axis measure.
template <typename Scalar>
Scalar marginal_violation(const CouplingTensor<Scalar>& gamma) {
  Scalar worst(0);
  for (Index k = 0; k < gamma.order(); ++k)
    worst = std::max<Scalar>(
        worst, (marginal_weights(gamma, k) - gamma.axis(k).weights()).cwiseAbs().maxCoeff());
  return worst;
}

template <typename Scalar>
bool is_feasible(const CouplingTensor<Scalar>& gamma, double tol = 1e-10) {
  return static_cast<double>(marginal_violation(gamma)) <= tol;
}

/// Independent coupling of the given marginals.
template <typename Scalar>
CouplingTensor<Scalar> independent_coupling(const std::vector<DiscreteMeasure<Scalar>>& marginals) {
  std::vector<CouplingEntry<Scalar>> entries{{IndexTuple{}, Scalar(1)}};
  for (const auto& m : marginals) {
    std::vector<CouplingEntry<Scalar>> next;
    next.reserve(entries.size() * static_cast<std::size_t>(m.size()));
    for (const auto& e : entries)
      for (Index a = 0; a < m.size(); ++a) {
        if (m.weight(a) == Scalar(0)) continue;
        auto t = e.tuple;
        t.push_back(a);
        next.push_back({std::move(t), e.mass * m.weight(a)});
      }
    entries = std::move(next);
  }
  return CouplingTensor<Scalar>(marginals, std::move(entries));
}

/// Tensor product: axes concatenate, masses multiply.
template <typename Scalar>
CouplingTensor<Scalar> product(const CouplingTensor<Scalar>& a, const CouplingTensor<Scalar>& b) {
  auto axes = a.axes();
  axes.insert(axes.end(), b.axes().begin(), b.axes().end());
  std::vector<CouplingEntry<Scalar>> entries;
  entries.reserve(a.entries().size() * b.entries().size());
  for (const auto& ea : a.entries())
    for (const auto& eb : b.entries()) {
      auto t = ea.tuple;
      t.insert(t.end(), eb.tuple.begin(), eb.tuple.end());
      entries.push_back({std::move(t), ea.mass * eb.mass});
    }
  return CouplingTensor<Scalar>(std::move(axes), std::move(entries));
}

/// Shifts every axis support by the same vector.
template <typename Scalar, typename Derived>
CouplingTensor<Scalar> translate(const CouplingTensor<Scalar>& gamma,
                                 const Eigen::MatrixBase<Derived>& shift) {
  std::vector<DiscreteMeasure<Scalar>> axes;
  axes.reserve(gamma.axes().size());
  for (const auto& ax : gamma.axes()) axes.push_back(translate(ax, shift));
  return CouplingTensor<Scalar>(std::move(axes), gamma.entries());
}

/// Average over all coordinate permutations. Every output axis carries the
/// union support and the average of the input axis measures.
template <typename Scalar>
CouplingTensor<Scalar> symmetrize(const CouplingTensor<Scalar>& gamma) {
  const Index n = gamma.order();
  if (n > kMaxSymmetrizeOrder)
    throw std::invalid_argument("symmetrize: order " + std::to_string(n) +
                                " exceeds exact-symmetrization limit " +
                                std::to_string(kMaxSymmetrizeOrder));
  for (const auto& ax : gamma.axes())
    if (ax.dim() != gamma.dim()) throw std::invalid_argument("symmetrize: axes differ in dimension");

  const DiscreteMeasure<Scalar> common =
      mixture(gamma.axes(), std::vector<Scalar>(static_cast<std::size_t>(n), Scalar(1) / Scalar(n)));
  // Every input atom is present in the union support.
  std::vector<std::vector<Index>> remap(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const auto& ax = gamma.axis(k);
    for (Index a = 0; a < ax.size(); ++a) remap[static_cast<std::size_t>(k)].push_back(*common.find(ax.point(a)));
  }

  std::vector<Index> sigma(static_cast<std::size_t>(n));
  std::iota(sigma.begin(), sigma.end(), Index{0});
  std::vector<std::vector<Index>> perms;
  do {
    perms.push_back(sigma);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  const Scalar count(perms.size());

  std::vector<CouplingEntry<Scalar>> entries;
  entries.reserve(perms.size() * gamma.entries().size());
  for (const auto& p : perms)
    for (const auto& e : gamma.entries()) {
      IndexTuple t(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < t.size(); ++k) {
        const auto src = static_cast<std::size_t>(p[k]);
        t[k] = remap[src][static_cast<std::size_t>(e.tuple[src])];
      }
      entries.push_back({std::move(t), e.mass / count});
    }
  return CouplingTensor<Scalar>(std::vector<DiscreteMeasure<Scalar>>(static_cast<std::size_t>(n), common),
                                std::move(entries));
}

/// Multi-index north-west corner rule: a vertex of the coupling polytope built
/// by greedily exhausting atoms in the given per-axis visiting orders.
template <typename Scalar>
CouplingTensor<Scalar> northwest_corner(const std::vector<DiscreteMeasure<Scalar>>& marginals,
                                        const std::vector<std::vector<Index>>& orders) {
  const std::size_t n = marginals.size();
  if (n == 0 || orders.size() != n) throw std::invalid_argument("northwest_corner: bad orders");
  std::vector<std::vector<Scalar>> remaining(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (static_cast<Index>(orders[k].size()) != marginals[k].size())
      throw std::invalid_argument("northwest_corner: order is not a permutation of the support");
    for (Index a : orders[k]) remaining[k].push_back(marginals[k].weight(a));
  }
  std::vector<std::size_t> cursor(n, 0);
  std::vector<CouplingEntry<Scalar>> entries;
  constexpr double kExhausted = 1e-15;
  while (true) {
    Scalar take = remaining[0][cursor[0]];
    for (std::size_t k = 1; k < n; ++k) take = std::min(take, remaining[k][cursor[k]]);
    IndexTuple t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = orders[k][cursor[k]];
    entries.push_back({std::move(t), std::max(take, Scalar(0))});
    bool done = false;
    for (std::size_t k = 0; k < n; ++k) {
      remaining[k][cursor[k]] -= take;
      if (static_cast<double>(remaining[k][cursor[k]]) <= kExhausted) {
        if (cursor[k] + 1 == remaining[k].size())
          done = true;
        else
          ++cursor[k];
      }
    }
    if (done) break;
  }
  return CouplingTensor<Scalar>(marginals, std::move(entries));
}

/// Integral of a pointwise function of the d x N tuple matrix.
template <typename Scalar, typename F>
Scalar expectation(const CouplingTensor<Scalar>& gamma, F&& f) {
  Scalar total(0);
  for (const auto& e : gamma.entries()) total += e.mass * f(gamma.gather(e.tuple));
  return total;
}

}  // namespace mmot
