#pragma once

#include "mmot/entropic.hpp"
#include "mmot/exact_solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace mmot {

enum class Backend { lp, entropic };

std::string to_string(Backend backend);
Backend parse_backend(const std::string& name);

/// A solver that could not produce a usable optimum.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendOptions {
  LpOptions lp;
  EntropicOptions entropic;
  /// Entropic schedule as multiples of the finite cost range.
  std::vector<double> relative_epsilons{1e-1, 1e-2, 1e-3};
};

struct SceResult {
  double value = 0.0;
  bool ok = false;
  std::string status;
  /// Objective of the symmetrized optimal plan (LP backend only).
  std::optional<double> symmetrized_value;
  std::optional<SolveReport> lp;
  std::optional<ScheduleResult> entropic;
};

/// N-electron strictly-correlated (Coulomb MMOT) energy of rho, all marginals equal to rho.
/// N = 1 has no pairs and gives 0.
SceResult sce_functional(const Measure& rho, int n, Backend backend,
                         const BackendOptions& options = {});

/// Memoizes sce_functional per (rho, N, backend).
class SceCache {
 public:
  explicit SceCache(BackendOptions options = {}) : options_(std::move(options)) {}
  const SceResult& get(const Measure& rho, int n, Backend backend);
  std::size_t size() const { return cache_.size(); }

 private:
  using Key = std::tuple<std::vector<double>, std::vector<double>, Index, int, int>;
  BackendOptions options_;
  std::map<Key, SceResult> cache_;
};

struct DissociationRow {
  double eta = 0.0;
  double sce_alpha = 0.0;
  double sce_beta = 0.0;
  double interaction_exact = 0.0;
  double u_int = 0.0;
  double eta3_term = 0.0;
  double residual_order2 = 0.0;
  double residual_order3 = 0.0;
  double total = 0.0;
  Backend backend = Backend::lp;
  std::string solve_status;  ///< "ok", "inadmissible", or the SCE failure status
};

struct DissociationReport {
  std::vector<DissociationRow> rows;  ///< eta descending
  int n_alpha = 1;
  int n_beta = 1;
  Index d = 1;
  Measure rho_alpha;
  Measure rho_beta;
  std::uint64_t seed = 0;
  /// Largest eta below which every row has residual_order3 <= residual_order2.
  std::optional<double> order3_threshold;
};

/// Product-plan dissociation energy at each eta: SCE of both molecules
/// (eta-independent, solved once) plus the analytic inter-molecular term,
/// with Taylor columns. Rows whose eta is inadmissible for the supports are
/// kept with status "inadmissible" and NaN energies. Throws SolverFailure if
/// an SCE solve fails.
DissociationReport dissociation_curve(const Measure& rho_alpha, const Measure& rho_beta,
                                      int n_alpha, int n_beta, std::vector<double> etas,
                                      Backend backend, const BackendOptions& options = {});

inline constexpr double kResidualNoiseFloor = 1e-14;

struct SlopeCheck {
  std::optional<double> slope2;
  std::optional<double> slope3;
  std::string status2;  ///< "ok" or "indeterminate"
  std::string status3;
  Index rows_used = 0;
};

/// Least-squares slopes of log residual against log eta over rows with eta in
/// [eta_lo, eta_hi]. Needs at least four rows (std::invalid_argument otherwise);
/// a residual at or below the noise floor makes that slope indeterminate.
SlopeCheck taylor_slope_check(const DissociationReport& report, double eta_lo = 1e-3,
                              double eta_hi = 1e-2);

/// `count` geometrically spaced values from hi down to lo.
std::vector<double> geometric_grid(double lo, double hi, int count);

struct DiracDemoReport {
  double lp_value = 0.0;
  double product_value = 0.0;
  std::vector<double> plan_values;
  double max_spread = 0.0;
  bool all_equal = false;
  double product_graphical_fraction = 0.0;
  bool product_non_graphical = false;
  SolveStatus lp_status = SolveStatus::numerical_failure;
  double lp_duality_gap = 0.0;
  bool lp_certified = false;
};

inline constexpr double kDegeneracyTolerance = 1e-12;

/// Bilinear problem with Dirac beta marginals at `y_hats`: compares the LP
/// optimum, the closed-form product-plan value, and `plans` random feasible
/// plans, and checks that the product plan is not graphical.
DiracDemoReport dirac_degeneracy_demo(const std::vector<Measure>& x_marginals,
                                      const std::vector<Vector>& y_hats, int plans,
                                      std::uint64_t seed, const LpOptions& lp = {});

/// Random feasible coupling: a random convex combination of north-west-corner
/// vertices under shuffled atom orders and the independent coupling.
Coupling random_feasible_plan(const std::vector<Measure>& marginals, std::uint64_t seed);

}  // namespace mmot
