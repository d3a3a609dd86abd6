#pragma once

#include "mmot/measure.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmot {

enum class CostFamily { coulomb, coulomb_eta, harmonic, bilinear };

std::string to_string(CostFamily family);
/// Throws std::invalid_argument on an unknown name.
CostFamily parse_cost_family(const std::string& name);

/// Parametric cost description. For the two-molecule families the first
/// `n_alpha` axes carry molecule alpha and the next `n_beta` molecule beta;
/// the plain Coulomb family treats all `n_alpha + n_beta` axes as one group.
struct CostSpec {
  CostFamily family = CostFamily::bilinear;
  int n_alpha = 1;
  int n_beta = 1;
  double eta = 0.0;
  int d = 1;

  int order() const { return n_alpha + n_beta; }
  void validate() const;
};

// Pointwise costs. Arguments are d x K matrices holding one point per column.

/// Sum over pairs of 1/|z_i - z_j|; +inf when two points coincide.
template <typename Derived>
typename Derived::Scalar coulomb_total(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (z.cols() < 2) throw std::invalid_argument("coulomb_total: needs at least two points");
  Scalar total(0);
  for (Index i = 0; i < z.cols(); ++i)
    for (Index j = i + 1; j < z.cols(); ++j) {
      const Scalar r = (z.col(i) - z.col(j)).norm();
      if (r == Scalar(0)) return infinite_cost<Scalar>();
      total += Scalar(1) / r;
    }
  return total;
}

/// Intra-group Coulomb energy; zero for fewer than two points.
template <typename Derived>
typename Derived::Scalar group_coulomb(const Eigen::MatrixBase<Derived>& z) {
  return z.cols() < 2 ? typename Derived::Scalar(0) : coulomb_total(z);
}

/// 1 - 2 eta (a^1 - b^1) + eta^2 |a - b|^2.
template <typename DA, typename DB, typename Scalar>
Scalar interaction_radicand(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                            Scalar eta) {
  const auto delta = (a - b).eval();
  return Scalar(1) - Scalar(2) * eta * delta[0] + eta * eta * delta.squaredNorm();
}

/// Inter-molecular Coulomb term between an alpha electron at a and a beta electron at b,
/// in center-of-molecule coordinates at inverse separation eta.
template <typename DA, typename DB, typename Scalar>
Scalar interaction_kernel(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                          Scalar eta) {
  const Scalar radicand = interaction_radicand(a, b, eta);
  if (!(radicand > Scalar(0))) throw std::domain_error("eta too large for support");
  return eta / std::sqrt(radicand);
}

/// Rescaled Coulomb cost of two molecules: inter-molecular kernel plus both intra terms.
template <typename DX, typename DY, typename Scalar>
Scalar coulomb_eta(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y, Scalar eta) {
  if (!(eta > Scalar(0))) throw std::invalid_argument("coulomb_eta: eta must be positive");
  if (x.rows() != y.rows()) throw std::invalid_argument("coulomb_eta: dimension mismatch");
  Scalar total(0);
  for (Index i = 0; i < x.cols(); ++i)
    for (Index j = 0; j < y.cols(); ++j) {
      const Scalar radicand = interaction_radicand(x.col(i), y.col(j), eta);
      if (!(radicand > Scalar(0)))
        throw std::domain_error("eta too large for support: x" + std::to_string(i) + ", y" +
                                std::to_string(j));
      total += eta / std::sqrt(radicand);
    }
  const Scalar ax = group_coulomb(x);
  const Scalar ay = group_coulomb(y);
  if (!is_finite_cost(ax) || !is_finite_cost(ay)) return infinite_cost<Scalar>();
  return total + ax + ay;
}

/// sum_i sum_j x_i . star(y_j), evaluated as (sum_i x_i) . star(sum_j y_j).
template <typename DX, typename DY>
typename DX::Scalar bilinear_cost(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("bilinear_cost: dimension mismatch");
  return x.rowwise().sum().dot(star(y.rowwise().sum()));
}

/// 1/2 sum_i sum_j (3 (x_i^1 - y_j^1)^2 - |x_i - y_j|^2).
template <typename DX, typename DY>
typename DX::Scalar harmonic_cost(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.rows() != y.rows()) throw std::invalid_argument("harmonic_cost: dimension mismatch");
  Scalar total(0);
  for (Index i = 0; i < x.cols(); ++i)
    for (Index j = 0; j < y.cols(); ++j) {
      const auto delta = (x.col(i) - y.col(j)).eval();
      total += Scalar(3) * delta[0] * delta[0] - delta.squaredNorm();
    }
  return total / Scalar(2);
}

/// harmonic_cost - bilinear_cost; a sum of one-variable terms, so its integral
/// only depends on the marginals.
template <typename DX, typename DY>
typename DX::Scalar harmonic_bilinear_gap(const Eigen::MatrixBase<DX>& x,
                                          const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  auto f = [](const auto& v) { return Scalar(3) * v[0] * v[0] - v.squaredNorm(); };
  Scalar gx(0), gy(0);
  for (Index i = 0; i < x.cols(); ++i) gx += f(x.col(i));
  for (Index j = 0; j < y.cols(); ++j) gy += f(y.col(j));
  return (Scalar(y.cols()) * gx + Scalar(x.cols()) * gy) / Scalar(2);
}

/// Throws std::domain_error naming the first atom pair whose radicand is not positive.
template <typename Scalar>
void check_eta_admissible(const DiscreteMeasure<Scalar>& rho_alpha,
                          const DiscreteMeasure<Scalar>& rho_beta, Scalar eta) {
  if (!(eta > Scalar(0))) throw std::invalid_argument("eta must be positive");
  for (Index a = 0; a < rho_alpha.size(); ++a)
    for (Index b = 0; b < rho_beta.size(); ++b)
      if (!(interaction_radicand(rho_alpha.point(a), rho_beta.point(b), eta) > Scalar(0)))
        throw std::domain_error("eta too large for support: alpha atom " + std::to_string(a) +
                                " and beta atom " + std::to_string(b) + " at eta=" +
                                std::to_string(static_cast<double>(eta)));
}

template <typename Scalar>
bool is_eta_admissible(const DiscreteMeasure<Scalar>& rho_alpha,
                       const DiscreteMeasure<Scalar>& rho_beta, Scalar eta) {
  try {
    check_eta_admissible(rho_alpha, rho_beta, eta);
    return true;
  } catch (const std::domain_error&) {
    return false;
  }
}

/// N_a N_b (eta + (m1_alpha - m1_beta) eta^2).
template <typename Scalar>
Scalar u_int(const DiscreteMeasure<Scalar>& rho_alpha, const DiscreteMeasure<Scalar>& rho_beta,
             int n_alpha, int n_beta, Scalar eta) {
  if (!(eta > Scalar(0))) throw std::invalid_argument("u_int: eta must be positive");
  const Scalar shift = first_coordinate_mean(rho_alpha) - first_coordinate_mean(rho_beta);
  return Scalar(n_alpha) * Scalar(n_beta) * (eta + shift * eta * eta);
}

/// Inter-molecular energy of any product plan: N_a N_b times the kernel
/// integrated against rho_alpha x rho_beta.
template <typename Scalar>
Scalar interaction_exact(const DiscreteMeasure<Scalar>& rho_alpha,
                         const DiscreteMeasure<Scalar>& rho_beta, int n_alpha, int n_beta,
                         Scalar eta) {
  check_eta_admissible(rho_alpha, rho_beta, eta);
  Scalar total(0);
  for (Index a = 0; a < rho_alpha.size(); ++a)
    for (Index b = 0; b < rho_beta.size(); ++b)
      total += rho_alpha.weight(a) * rho_beta.weight(b) *
               interaction_kernel(rho_alpha.point(a), rho_beta.point(b), eta);
  return Scalar(n_alpha) * Scalar(n_beta) * total;
}

/// N_a N_b times the harmonic integrand integrated against rho_alpha x rho_beta
/// (the eta^3 coefficient of the expansion).
template <typename Scalar>
Scalar eta3_coefficient(const DiscreteMeasure<Scalar>& rho_alpha,
                        const DiscreteMeasure<Scalar>& rho_beta, int n_alpha, int n_beta) {
  if (rho_alpha.dim() != rho_beta.dim()) throw std::invalid_argument("dimension mismatch");
  Scalar total(0);
  for (Index a = 0; a < rho_alpha.size(); ++a)
    for (Index b = 0; b < rho_beta.size(); ++b)
      total += rho_alpha.weight(a) * rho_beta.weight(b) *
               harmonic_cost(rho_alpha.point(a), rho_beta.point(b));
  return Scalar(n_alpha) * Scalar(n_beta) * total;
}

/// Truncated expansion of interaction_exact: order 2 is u_int, order 3 adds the eta^3 term.
template <typename Scalar>
Scalar taylor_value(const DiscreteMeasure<Scalar>& rho_alpha,
                    const DiscreteMeasure<Scalar>& rho_beta, int n_alpha, int n_beta, Scalar eta,
                    int order) {
  if (order != 2 && order != 3) throw std::invalid_argument("taylor_value: order must be 2 or 3");
  Scalar value = u_int(rho_alpha, rho_beta, n_alpha, n_beta, eta);
  if (order == 3) value += eta * eta * eta * eta3_coefficient(rho_alpha, rho_beta, n_alpha, n_beta);
  return value;
}

namespace detail {

/// (1+s)^{-1/2} - 1 + s/2 - 3 s^2 / 8, without cancellation for small |s|.
template <typename Scalar>
Scalar inverse_sqrt_tail3(Scalar s) {
  if (std::abs(s) <= Scalar(0.25)) {
    // c_{k+1} = -c_k (2k+1)/(2k+2), c_3 = -5/16
    Scalar c = Scalar(-5) / Scalar(16);
    Scalar power = s * s * s;
    Scalar sum(0);
    for (int k = 3; k < 200; ++k) {
      const Scalar term = c * power;
      sum += term;
      if (std::abs(term) <= std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3) * std::abs(sum))
        break;
      c *= -Scalar(2 * k + 1) / Scalar(2 * k + 2);
      power *= s;
    }
    return sum;
  }
  return Scalar(1) / std::sqrt(Scalar(1) + s) - Scalar(1) + s / Scalar(2) -
         Scalar(3) * s * s / Scalar(8);
}

}  // namespace detail

/// Signed remainder interaction_exact - taylor_value(order), accumulated per
/// atom pair from the tail of the binomial series so it keeps full relative
/// accuracy when eta is small.
template <typename Scalar>
Scalar taylor_remainder(const DiscreteMeasure<Scalar>& rho_alpha,
                        const DiscreteMeasure<Scalar>& rho_beta, int n_alpha, int n_beta,
                        Scalar eta, int order) {
  if (order != 2 && order != 3) throw std::invalid_argument("taylor_remainder: order must be 2 or 3");
  check_eta_admissible(rho_alpha, rho_beta, eta);
  Scalar total(0);
  for (Index a = 0; a < rho_alpha.size(); ++a)
    for (Index b = 0; b < rho_beta.size(); ++b) {
      const VectorX<Scalar> delta = rho_alpha.point(a) - rho_beta.point(b);
      const Scalar d1 = delta[0];
      const Scalar q = delta.squaredNorm();
      const Scalar s = eta * (Scalar(-2) * d1 + eta * q);
      const Scalar e3 = eta * eta * eta;
      Scalar tail = detail::inverse_sqrt_tail3(s) - Scalar(1.5) * e3 * d1 * q +
                    Scalar(0.375) * e3 * eta * q * q;
      if (order == 2) tail += eta * eta * (Scalar(3) * d1 * d1 - q) / Scalar(2);
      total += rho_alpha.weight(a) * rho_beta.weight(b) * eta * tail;
    }
  return Scalar(n_alpha) * Scalar(n_beta) * total;
}

/// Constant C with harmonic objective = bilinear objective + C on every plan
/// whose alpha marginals are rho_alpha and beta marginals rho_beta:
/// C = 1/2 N_a N_b [3 M2^1(rho_a) + 3 M2^1(rho_b) - M2(rho_a) - M2(rho_b)].
template <typename Scalar>
Scalar quad_bilinear_constant(const DiscreteMeasure<Scalar>& rho_alpha,
                              const DiscreteMeasure<Scalar>& rho_beta, int n_alpha, int n_beta) {
  const Scalar inner = Scalar(3) * first_coordinate_second_moment(rho_alpha) +
                       Scalar(3) * first_coordinate_second_moment(rho_beta) -
                       second_moment(rho_alpha) - second_moment(rho_beta);
  return Scalar(n_alpha) * Scalar(n_beta) * inner / Scalar(2);
}

/// Same constant for per-axis marginals; the first `n_alpha` are the alpha axes.
template <typename Scalar>
Scalar quad_bilinear_constant(const std::vector<DiscreteMeasure<Scalar>>& marginals, int n_alpha) {
  if (n_alpha < 1 || n_alpha >= static_cast<int>(marginals.size()))
    throw std::invalid_argument("quad_bilinear_constant: n_alpha must split the marginals");
  const int n_beta = static_cast<int>(marginals.size()) - n_alpha;
  auto g = [](const DiscreteMeasure<Scalar>& m) {
    return Scalar(3) * first_coordinate_second_moment(m) - second_moment(m);
  };
  Scalar gx(0), gy(0);
  for (int i = 0; i < n_alpha; ++i) gx += g(marginals[static_cast<std::size_t>(i)]);
  for (int j = n_alpha; j < static_cast<int>(marginals.size()); ++j)
    gy += g(marginals[static_cast<std::size_t>(j)]);
  return (Scalar(n_beta) * gx + Scalar(n_alpha) * gy) / Scalar(2);
}

}  // namespace mmot
