#include "mmot/dissociation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>

namespace mmot {

std::string to_string(Backend backend) {
  return backend == Backend::lp ? "lp" : "entropic";
}

Backend parse_backend(const std::string& name) {
  if (name == "lp") return Backend::lp;
  if (name == "entropic") return Backend::entropic;
  throw std::invalid_argument("unknown backend '" + name + "' (expected lp or entropic)");
}

SceResult sce_functional(const Measure& rho, int n, Backend backend,
                         const BackendOptions& options) {
  if (n < 1) throw std::invalid_argument("sce_functional: N must be >= 1");
  SceResult result;
  if (n == 1) {
    result.ok = true;
    result.status = "ok";
    return result;
  }
  CostSpec spec;
  spec.family = CostFamily::coulomb;
  spec.n_alpha = n;
  spec.n_beta = 0;
  spec.d = rho.dim();
  const std::vector<Measure> marginals(static_cast<std::size_t>(n), rho);
  const CostTensor cost = cost_tensor(spec, marginals);

  if (backend == Backend::lp) {
    SolveReport report = solve_lp(cost, marginals, options.lp);
    result.status = to_string(report.status);
    if (report.optimal()) {
      result.ok = true;
      result.status = "ok";
      result.value = report.value;
      if (n <= kMaxSymmetrizeOrder) {
        const Coupling sym = symmetrize(*report.coupling);
        // symmetrize() rebuilds the common support; it keeps rho's atom order.
        if (sym.axis(0).points() == rho.points()) result.symmetrized_value = expected_cost(sym, cost);
      }
    }
    result.lp = std::move(report);
    return result;
  }

  if (cost.finite_count() == 0) {
    result.status = "infeasible";
    return result;
  }
  double range = cost.max_finite() - cost.min_finite();
  if (!(range > 0.0)) range = std::max(1.0, std::abs(cost.max_finite()));
  std::vector<double> eps;
  for (double r : options.relative_epsilons) eps.push_back(r * range);
  ScheduleResult schedule = epsilon_schedule_solve(cost, marginals, eps, options.entropic);
  result.value = schedule.final.value;
  result.ok = schedule.final.status == EntropicStatus::converged;
  result.status = result.ok ? "ok" : to_string(schedule.final.status);
  result.entropic = std::move(schedule);
  return result;
}

const SceResult& SceCache::get(const Measure& rho, int n, Backend backend) {
  const auto& p = rho.points();
  const auto& w = rho.weights();
  Key key{std::vector<double>(p.data(), p.data() + p.size()),
          std::vector<double>(w.data(), w.data() + w.size()), rho.dim(), n,
          static_cast<int>(backend)};
  auto it = cache_.find(key);
  if (it == cache_.end())
    it = cache_.emplace(std::move(key), sce_functional(rho, n, backend, options_)).first;
  return it->second;
}

namespace {

void require_sce(const SceResult& r, const char* which) {
  if (r.ok) return;
  std::string msg = std::string("SCE solve for ") + which + " failed: " + r.status;
  if (r.lp && !r.lp->message.empty()) msg += " (" + r.lp->message + ")";
  throw SolverFailure(msg);
}

DissociationRow make_row(const Measure& ra, const Measure& rb, int na, int nb, double eta,
                         double sce_a, double sce_b, Backend backend) {
  DissociationRow row;
  row.eta = eta;
  row.sce_alpha = sce_a;
  row.sce_beta = sce_b;
  row.backend = backend;
  if (!is_eta_admissible(ra, rb, eta)) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    row.interaction_exact = row.u_int = row.eta3_term = nan;
    row.residual_order2 = row.residual_order3 = row.total = nan;
    row.solve_status = "inadmissible";
    return row;
  }
  row.interaction_exact = interaction_exact(ra, rb, na, nb, eta);
  row.u_int = u_int(ra, rb, na, nb, eta);
  row.eta3_term = eta * eta * eta * eta3_coefficient(ra, rb, na, nb);
  row.residual_order2 = std::abs(taylor_remainder(ra, rb, na, nb, eta, 2));
  row.residual_order3 = std::abs(taylor_remainder(ra, rb, na, nb, eta, 3));
  row.total = sce_a + sce_b + row.interaction_exact;
  row.solve_status = "ok";
  return row;
}

}  // namespace

DissociationReport dissociation_curve(const Measure& rho_alpha, const Measure& rho_beta,
                                      int n_alpha, int n_beta, std::vector<double> etas,
                                      Backend backend, const BackendOptions& options) {
  if (n_alpha < 1 || n_beta < 1)
    throw std::invalid_argument("dissociation_curve: electron counts must be >= 1");
  if (rho_alpha.dim() != rho_beta.dim())
    throw std::invalid_argument("dissociation_curve: dimension mismatch");
  if (etas.empty()) throw std::invalid_argument("dissociation_curve: empty eta list");
  for (double eta : etas)
    if (!(eta > 0.0) || !std::isfinite(eta))
      throw std::invalid_argument("dissociation_curve: eta values must be positive and finite");
  std::sort(etas.begin(), etas.end(), std::greater<>());

  SceCache cache(options);
  const SceResult& sa = cache.get(rho_alpha, n_alpha, backend);
  require_sce(sa, "rho_alpha");
  const SceResult& sb = cache.get(rho_beta, n_beta, backend);
  require_sce(sb, "rho_beta");

  std::vector<std::future<DissociationRow>> jobs;
  for (double eta : etas)
    jobs.push_back(std::async(std::launch::async, make_row, std::cref(rho_alpha),
                              std::cref(rho_beta), n_alpha, n_beta, eta, sa.value, sb.value,
                              backend));

  DissociationReport report;
  report.n_alpha = n_alpha;
  report.n_beta = n_beta;
  report.d = rho_alpha.dim();
  report.rho_alpha = rho_alpha;
  report.rho_beta = rho_beta;
  for (auto& job : jobs) report.rows.push_back(job.get());

  // Walk from the smallest eta upwards while the order-3 residual stays below order 2.
  for (auto it = report.rows.rbegin(); it != report.rows.rend(); ++it) {
    if (it->solve_status != "ok" || !(it->residual_order3 <= it->residual_order2)) break;
    report.order3_threshold = it->eta;
  }
  return report;
}

SlopeCheck taylor_slope_check(const DissociationReport& report, double eta_lo, double eta_hi) {
  if (!(eta_lo > 0.0) || !(eta_hi > eta_lo))
    throw std::invalid_argument("taylor_slope_check: need 0 < eta_lo < eta_hi");
  constexpr double slack = 1e-12;
  std::vector<const DissociationRow*> rows;
  for (const auto& r : report.rows)
    if (r.solve_status == "ok" && r.eta >= eta_lo * (1.0 - slack) &&
        r.eta <= eta_hi * (1.0 + slack))
      rows.push_back(&r);
  if (rows.size() < 4)
    throw std::invalid_argument("taylor_slope_check: " + std::to_string(rows.size()) +
                                " usable rows in the eta window, need at least 4");

  auto fit = [&](double DissociationRow::*column, std::optional<double>& slope,
                 std::string& status) {
    std::vector<double> x, y;
    for (const auto* r : rows) {
      const double v = r->*column;
      if (!(v > kResidualNoiseFloor)) {
        status = "indeterminate";
        return;
      }
      x.push_back(std::log(r->eta));
      y.push_back(std::log(v));
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) {
      status = "indeterminate";
      return;
    }
    slope = sxy / sxx;
    status = "ok";
  };

  SlopeCheck check;
  check.rows_used = static_cast<Index>(rows.size());
  fit(&DissociationRow::residual_order2, check.slope2, check.status2);
  fit(&DissociationRow::residual_order3, check.slope3, check.status3);
  return check;
}

std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("geometric_grid: need 0 < lo < hi");
  if (count < 2) throw std::invalid_argument("geometric_grid: count must be >= 2");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double ratio = std::log(lo / hi);
  for (int i = 0; i < count; ++i)
    grid[static_cast<std::size_t>(i)] = hi * std::exp(ratio * i / (count - 1));
  grid.front() = hi;
  grid.back() = lo;
  return grid;
}

Coupling random_feasible_plan(const std::vector<Measure>& marginals, std::uint64_t seed) {
  if (marginals.empty()) throw std::invalid_argument("random_feasible_plan: no marginals");
  std::mt19937_64 rng(seed);
  constexpr int vertices = 3;
  std::vector<Coupling> parts;
  for (int v = 0; v < vertices; ++v) {
    std::vector<std::vector<Index>> orders;
    for (const auto& m : marginals) {
      std::vector<Index> order(static_cast<std::size_t>(m.size()));
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), rng);
      orders.push_back(std::move(order));
    }
    parts.push_back(northwest_corner(marginals, orders));
  }
  parts.push_back(independent_coupling(marginals));

  std::exponential_distribution<double> expo(1.0);
  std::vector<double> lambda;
  for (std::size_t i = 0; i < parts.size(); ++i) lambda.push_back(expo(rng));
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);

  std::vector<Coupling::Entry> entries;
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (const auto& e : parts[i].entries()) entries.push_back({e.tuple, e.mass * lambda[i] / total});
  return Coupling(marginals, std::move(entries));
}

DiracDemoReport dirac_degeneracy_demo(const std::vector<Measure>& x_marginals,
                                      const std::vector<Vector>& y_hats, int plans,
                                      std::uint64_t seed, const LpOptions& lp) {
  if (x_marginals.empty() || y_hats.empty())
    throw std::invalid_argument("dirac_degeneracy_demo: need x marginals and Dirac positions");
  if (plans < 0) throw std::invalid_argument("dirac_degeneracy_demo: plans must be >= 0");
  std::vector<Measure> marginals = x_marginals;
  for (const auto& y : y_hats) marginals.push_back(Measure::dirac(y));

  CostSpec spec;
  spec.family = CostFamily::bilinear;
  spec.n_alpha = static_cast<int>(x_marginals.size());
  spec.n_beta = static_cast<int>(y_hats.size());
  spec.d = x_marginals.front().dim();
  const CostTensor cost = cost_tensor(spec, marginals);

  DiracDemoReport report;
  const SolveReport solved = solve_lp(cost, marginals, lp);
  report.lp_status = solved.status;
  report.lp_value = solved.value;
  report.lp_duality_gap = solved.duality_gap();
  report.lp_certified = solved.optimal() && verify_splitting(solved, cost).valid;
  report.product_value = product_bilinear_value(marginals, spec.n_alpha);

  std::mt19937_64 seeder(seed);
  for (int k = 0; k < plans; ++k)
    report.plan_values.push_back(expected_cost(random_feasible_plan(marginals, seeder()), cost));

  double lo = std::min(report.lp_value, report.product_value);
  double hi = std::max(report.lp_value, report.product_value);
  for (double v : report.plan_values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  report.max_spread = hi - lo;
  report.all_equal = solved.optimal() && report.max_spread <= kDegeneracyTolerance;

  const MongeDiagnostics diag = monge_diagnostics(independent_coupling(marginals));
  report.product_graphical_fraction = diag.graphical_fraction;
  report.product_non_graphical = !diag.graphical;
  return report;
}

}  // namespace mmot
