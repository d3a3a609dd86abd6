#pragma once

#include "mmot/cost_tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmot {

enum class EntropicStatus { converged, max_iter, infeasible };

std::string to_string(EntropicStatus status);

struct EntropicOptions {
  double tol = 1e-8;  ///< max over axes of the L1 marginal error
  Index max_iter = 100'000;
};

/// Log-domain potentials of an entropic solve. The implied coupling is
/// gamma(t) = exp((sum_k phi_k(t_k) - c(t)) / eps) prod_k rho_k(t_k).
struct EntropicState {
  std::vector<Vector> potentials;
  double epsilon = 0.0;
  Index iterations = 0;
  std::vector<double> error_history;  ///< marginal error after every sweep
};

struct EntropicResult {
  EntropicStatus status = EntropicStatus::max_iter;
  double value = 0.0;  ///< <c, gamma>, entropy term excluded
  double marginal_error = 0.0;
  EntropicState state;
};

/// Multi-marginal Sinkhorn: cyclic exact updates of one potential at a time
/// (axes 0..N-1), all reductions in log-sum-exp form. Sentinel cost entries
/// get zero mass. `warm_start` seeds the potentials.
EntropicResult solve_sinkhorn(const CostTensor& cost, const std::vector<Measure>& marginals,
                              double epsilon, const EntropicOptions& options = {},
                              const std::vector<Vector>* warm_start = nullptr);

struct ScheduleResult {
  EntropicResult final;
  std::vector<double> epsilons;
  std::vector<double> values;
  std::vector<EntropicStatus> statuses;
};

/// Runs solve_sinkhorn along a strictly decreasing epsilon list, warm-starting
/// each stage from the previous potentials.
ScheduleResult epsilon_schedule_solve(const CostTensor& cost,
                                      const std::vector<Measure>& marginals,
                                      const std::vector<double>& epsilons,
                                      const EntropicOptions& options = {});

/// Dense implied coupling, laid out like the cost tensor.
Vector implied_coupling(const CostTensor& cost, const std::vector<Measure>& marginals,
                        const EntropicState& state);

/// Implied coupling as a sparse CouplingTensor (entries below `drop` are discarded
/// and the remainder renormalized).
Coupling to_coupling(const CostTensor& cost, const std::vector<Measure>& marginals,
                     const EntropicState& state, double drop = 0.0);

}  // namespace mmot
