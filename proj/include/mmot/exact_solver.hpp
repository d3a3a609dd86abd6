#pragma once

#include "mmot/cost_tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmot {

enum class SolveStatus { optimal, infeasible, pivot_limit, numerical_failure };

std::string to_string(SolveStatus status);

/// Kantorovich potentials, one table per marginal aligned with its support.
struct DualPotentials {
  std::vector<Vector> tables;

  double sum(const IndexTuple& t) const;
  /// sum_k <u_k, rho_k>.
  double value(const std::vector<Measure>& marginals) const;
};

struct LpOptions {
  Index pivot_limit = 5'000'000;
  /// Optional permutation of flat tensor indices fixing the column order seen by
  /// Bland's rule; empty means natural order.
  std::vector<Index> column_order;
  double pivot_tolerance = 1e-9;
  double reduced_cost_tolerance = 1e-11;
  Index refactor_interval = 64;
};

struct SolveReport {
  SolveStatus status = SolveStatus::numerical_failure;
  double value = 0.0;       ///< primal objective
  double dual_value = 0.0;  ///< sum_k <u_k, rho_k>
  std::optional<Coupling> coupling;
  DualPotentials potentials;
  Index pivots = 0;
  Index phase_one_pivots = 0;
  std::string message;

  bool optimal() const { return status == SolveStatus::optimal; }
  double duality_gap() const { return std::abs(value - dual_value); }
};

/// Exact solution of the discrete multi-marginal Kantorovich problem.
///
/// Variables are the finite-cost tuples of `cost` (sentinel entries are left
/// out of the program). Two-phase revised simplex on the axial transport
/// polytope, Bland's rule for both entering and leaving choices; the optimal
/// simplex multipliers are returned as potentials. Deterministic for fixed
/// inputs and column order.
SolveReport solve_lp(const CostTensor& cost, const std::vector<Measure>& marginals,
                     const LpOptions& options = {});

struct SplittingViolation {
  enum class Kind { feasibility, equality } kind;
  IndexTuple tuple;
  double amount;
};

/// Certificate that the optimal support is a c-splitting set for the returned potentials.
struct SplittingCertificate {
  bool valid = false;
  double max_feasibility_violation = 0.0;  ///< max over finite tuples of sum u - c
  double max_equality_violation = 0.0;     ///< max over support of |sum u - c|
  double value_gap = 0.0;                  ///< |sum <u_k, rho_k> - primal|
  std::vector<SplittingViolation> violations;  ///< first few offenders
};

inline constexpr double kDualityTolerance = 1e-7;

SplittingCertificate verify_splitting(const SolveReport& report, const CostTensor& cost,
                                      double tol = 1e-8);

struct MongeDiagnostics {
  double graphical_fraction = 0.0;
  /// maps[i-1][a]: atom of axis i paired with atom a of the first marginal, when unique.
  std::vector<std::vector<std::optional<Index>>> maps;
  Index max_partners = 0;
  bool graphical = false;
  std::optional<bool> unique;
};

inline constexpr double kDefaultMassTolerance = 1e-9;
inline constexpr double kGraphicalThreshold = 1.0 - 1e-6;

/// Checks whether the coupling concentrates on the graph of a map over its first marginal.
MongeDiagnostics monge_diagnostics(const Coupling& gamma,
                                   double mass_tol = kDefaultMassTolerance);

struct ProbeOptions {
  int trials = 5;
  /// Perturbation size relative to the finite cost range.
  double delta = 1e-7;
  std::uint64_t seed = 0;
  double mass_tol = kDefaultMassTolerance;
  LpOptions lp;
};

struct ProbeReport {
  bool unique = false;
  bool supports_identical = false;
  double value_spread = 0.0;  ///< spread of unperturbed objective over trial optima
  double perturbation = 0.0;  ///< absolute perturbation bound actually used
  std::vector<std::vector<IndexTuple>> supports;
  std::vector<double> values;
  std::vector<SolveStatus> statuses;
  double max_duality_gap = 0.0;
  bool all_certified = false;
};

/// Re-solves under i.i.d. uniform cost perturbations and shuffled column
/// orders (trial 0 is the unperturbed natural-order solve) and reports whether
/// the optimal support is stable.
ProbeReport uniqueness_probe(const CostTensor& cost, const std::vector<Measure>& marginals,
                             const ProbeOptions& options = {});

/// Objective of the bilinear cost on any product plan whose first `n_alpha`
/// marginals form one factor: (sum_{i<Na} mean rho_i) . star(sum_{j>=Na} mean rho_j).
double product_bilinear_value(const std::vector<Measure>& marginals, int n_alpha);

/// Support tuples carrying more than `mass_tol`.
std::vector<IndexTuple> support(const Coupling& gamma, double mass_tol = kDefaultMassTolerance);

}  // namespace mmot
