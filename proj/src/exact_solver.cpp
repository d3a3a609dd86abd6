#include "mmot/exact_solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mmot {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::pivot_limit: return "pivot_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

double DualPotentials::sum(const IndexTuple& t) const {
  double s = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) s += tables[k][t[k]];
  return s;
}

double DualPotentials::value(const std::vector<Measure>& marginals) const {
  double v = 0.0;
  for (std::size_t k = 0; k < tables.size(); ++k) v += tables[k].dot(marginals[k].weights());
  return v;
}

namespace {

// Revised simplex on  min c.x  s.t.  A x = b, x >= 0, where every column of A
// has exactly one unit entry per axis block. Variable ids: structural columns
// 0..n-1 in Bland order, then one artificial per row.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<std::vector<Index>> rows, Vector cost, Vector rhs,
                   const LpOptions& options)
      : rows_(std::move(rows)),
        cost_(std::move(cost)),
        rhs_(std::move(rhs)),
        options_(options),
        n_(static_cast<Index>(rows_.size())),
        m_(rhs_.size()) {}

  SolveStatus run() {
    basis_.resize(static_cast<std::size_t>(m_));
    is_basic_.assign(static_cast<std::size_t>(n_ + m_), false);
    for (Index i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      is_basic_[static_cast<std::size_t>(n_ + i)] = true;
    }
    binv_ = Matrix::Identity(m_, m_);
    xb_ = rhs_;

    phase_ = 1;
    if (auto s = iterate(); s != SolveStatus::optimal) return s;
    phase_one_pivots_ = pivots_;
    double infeasibility = 0.0;
    for (Index i = 0; i < m_; ++i)
      if (is_artificial(basis_[static_cast<std::size_t>(i)])) infeasibility += xb_[i];
    if (infeasibility > 1e-9) return SolveStatus::infeasible;
    drive_out_artificials();

    phase_ = 2;
    return iterate();
  }

  Vector duals() const { return binv_.transpose() * basic_costs(); }
  const std::vector<Index>& basis() const { return basis_; }
  const Vector& basic_values() const { return xb_; }
  Index pivots() const { return pivots_; }
  Index phase_one_pivots() const { return phase_one_pivots_; }
  bool is_artificial(Index id) const { return id >= n_; }

 private:
  double var_cost(Index id) const {
    if (phase_ == 1) return is_artificial(id) ? 1.0 : 0.0;
    return is_artificial(id) ? 0.0 : cost_[id];
  }

  Vector basic_costs() const {
    Vector cb(m_);
    for (Index i = 0; i < m_; ++i) cb[i] = var_cost(basis_[static_cast<std::size_t>(i)]);
    return cb;
  }

  Vector column(Index id) const {
    if (is_artificial(id)) return binv_.col(id - n_);
    Vector d = Vector::Zero(m_);
    for (Index r : rows_[static_cast<std::size_t>(id)]) d += binv_.col(r);
    return d;
  }

  double reduced_cost(Index j, const Vector& y) const {
    double rc = var_cost(j);
    for (Index r : rows_[static_cast<std::size_t>(j)]) rc -= y[r];
    return rc;
  }

  SolveStatus iterate() {
    while (true) {
      const Vector y = duals();
      Index entering = -1;
      for (Index j = 0; j < n_; ++j) {
        if (is_basic_[static_cast<std::size_t>(j)]) continue;
        if (reduced_cost(j, y) < -options_.reduced_cost_tolerance) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return SolveStatus::optimal;
      if (pivots_ >= options_.pivot_limit) return SolveStatus::pivot_limit;

      const Vector d = column(entering);
      Index leave = -1;
      double best_ratio = 0.0;
      for (Index i = 0; i < m_; ++i) {
        const Index id = basis_[static_cast<std::size_t>(i)];
        double ratio;
        if (phase_ == 2 && is_artificial(id) && std::abs(d[i]) > options_.pivot_tolerance) {
          ratio = 0.0;  // a zero-level artificial must not leave zero
        } else if (d[i] > options_.pivot_tolerance) {
          ratio = std::max(xb_[i], 0.0) / d[i];
        } else {
          continue;
        }
        constexpr double kTie = 1e-13;
        if (leave < 0 || ratio < best_ratio - kTie) {
          leave = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + kTie && id < basis_[static_cast<std::size_t>(leave)]) {
          leave = i;
        }
      }
      if (leave < 0) return SolveStatus::numerical_failure;  // unbounded direction
      pivot(entering, leave, d);
    }
  }

  void pivot(Index entering, Index leave, const Vector& d) {
    const double dr = d[leave];
    const Vector row = binv_.row(leave) / dr;
    const double xr = xb_[leave] / dr;
    for (Index i = 0; i < m_; ++i) {
      if (i == leave) continue;
      if (d[i] != 0.0) {
        binv_.row(i) -= d[i] * row.transpose();
        xb_[i] -= d[i] * xr;
        if (xb_[i] < 0.0 && xb_[i] > -1e-13) xb_[i] = 0.0;
      }
    }
    binv_.row(leave) = row.transpose();
    xb_[leave] = std::max(xr, 0.0);
    is_basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leave)])] = false;
    is_basic_[static_cast<std::size_t>(entering)] = true;
    basis_[static_cast<std::size_t>(leave)] = entering;
    ++pivots_;
    if (pivots_ % options_.refactor_interval == 0) refactor();
  }

  void refactor() {
    Matrix b = Matrix::Zero(m_, m_);
    for (Index i = 0; i < m_; ++i) {
      const Index id = basis_[static_cast<std::size_t>(i)];
      if (is_artificial(id))
        b(id - n_, i) = 1.0;
      else
        for (Index r : rows_[static_cast<std::size_t>(id)]) b(r, i) = 1.0;
    }
    binv_ = b.partialPivLu().inverse();
    xb_ = binv_ * rhs_;
    for (Index i = 0; i < m_; ++i)
      if (xb_[i] < 0.0 && xb_[i] > -1e-12) xb_[i] = 0.0;
  }

  // Degenerate pivots replacing zero-level artificials by structural columns;
  // an artificial whose tableau row vanishes marks a redundant constraint.
  void drive_out_artificials() {
    for (Index i = 0; i < m_; ++i) {
      if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
      for (Index j = 0; j < n_; ++j) {
        if (is_basic_[static_cast<std::size_t>(j)]) continue;
        double entry = 0.0;
        for (Index r : rows_[static_cast<std::size_t>(j)]) entry += binv_(i, r);
        if (std::abs(entry) > options_.pivot_tolerance) {
          pivot(j, i, column(j));
          break;
        }
      }
    }
  }

  std::vector<std::vector<Index>> rows_;
  Vector cost_;
  Vector rhs_;
  LpOptions options_;
  Index n_;
  Index m_;
  int phase_ = 1;
  std::vector<Index> basis_;
  std::vector<bool> is_basic_;
  Matrix binv_;
  Vector xb_;
  Index pivots_ = 0;
  Index phase_one_pivots_ = 0;
};

}  // namespace

SolveReport solve_lp(const CostTensor& cost, const std::vector<Measure>& marginals,
                     const LpOptions& options) {
  if (static_cast<Index>(marginals.size()) != cost.order())
    throw std::invalid_argument("solve_lp: expected one marginal per cost axis");
  for (std::size_t k = 0; k < marginals.size(); ++k)
    if (marginals[k].size() != cost.shape()[k])
      throw std::invalid_argument("solve_lp: marginal " + std::to_string(k) +
                                  " does not match cost axis size");

  std::vector<Index> offset(marginals.size());
  Index m = 0;
  for (std::size_t k = 0; k < marginals.size(); ++k) {
    offset[k] = m;
    m += marginals[k].size();
  }
  Vector rhs(m);
  for (std::size_t k = 0; k < marginals.size(); ++k)
    rhs.segment(offset[k], marginals[k].size()) = marginals[k].weights();

  std::vector<Index> order = options.column_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(cost.size()));
    std::iota(order.begin(), order.end(), Index{0});
  } else if (static_cast<Index>(order.size()) != cost.size()) {
    throw std::invalid_argument("solve_lp: column order must permute all tensor entries");
  }

  std::vector<Index> flat_of_column;
  std::vector<std::vector<Index>> rows;
  std::vector<double> costs;
  for (Index flat : order) {
    if (!cost.is_finite(flat)) continue;
    const IndexTuple t = cost.tuple(flat);
    std::vector<Index> r(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) r[k] = offset[k] + t[k];
    rows.push_back(std::move(r));
    costs.push_back(cost[flat]);
    flat_of_column.push_back(flat);
  }

  SolveReport report;
  // A row whose atom carries mass but meets no finite tuple cannot be satisfied.
  {
    std::vector<bool> touched(static_cast<std::size_t>(m), false);
    for (const auto& r : rows)
      for (Index i : r) touched[static_cast<std::size_t>(i)] = true;
    for (Index i = 0; i < m; ++i)
      if (!touched[static_cast<std::size_t>(i)] && rhs[i] > 0.0) {
        report.status = SolveStatus::infeasible;
        report.message = "atom with positive mass has no finite-cost tuple (constraint row " +
                         std::to_string(i) + ")";
        return report;
      }
  }

  TransportSimplex simplex(rows, Eigen::Map<const Vector>(costs.data(), static_cast<Index>(costs.size())),
                           rhs, options);
  report.status = simplex.run();
  report.pivots = simplex.pivots();
  report.phase_one_pivots = simplex.phase_one_pivots();
  if (report.status != SolveStatus::optimal) {
    report.message = "simplex stopped: " + to_string(report.status);
    return report;
  }

  std::vector<Coupling::Entry> entries;
  double value = 0.0;
  const auto& basis = simplex.basis();
  const Vector& xb = simplex.basic_values();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Index id = basis[i];
    if (simplex.is_artificial(id)) continue;
    const double x = xb[static_cast<Index>(i)];
    if (x <= 0.0) continue;
    const Index flat = flat_of_column[static_cast<std::size_t>(id)];
    entries.push_back({cost.tuple(flat), x});
    value += x * cost[flat];
  }
  report.value = value;
  report.coupling.emplace(marginals, std::move(entries));

  const Vector y = simplex.duals();
  for (std::size_t k = 0; k < marginals.size(); ++k)
    report.potentials.tables.push_back(y.segment(offset[k], marginals[k].size()));
  report.dual_value = report.potentials.value(marginals);
  return report;
}

SplittingCertificate verify_splitting(const SolveReport& report, const CostTensor& cost,
                                      double tol) {
  SplittingCertificate cert;
  if (!report.coupling || report.potentials.tables.size() != static_cast<std::size_t>(cost.order()))
    return cert;
  constexpr std::size_t kMaxListed = 16;
  auto record = [&](SplittingViolation::Kind kind, IndexTuple t, double amount) {
    if (cert.violations.size() < kMaxListed) cert.violations.push_back({kind, std::move(t), amount});
  };

  double worst_feasibility = -std::numeric_limits<double>::infinity();
  for (Index flat = 0; flat < cost.size(); ++flat) {
    if (!cost.is_finite(flat)) continue;
    IndexTuple t = cost.tuple(flat);
    const double excess = report.potentials.sum(t) - cost[flat];
    worst_feasibility = std::max(worst_feasibility, excess);
    if (excess > tol) record(SplittingViolation::Kind::feasibility, std::move(t), excess);
  }
  cert.max_feasibility_violation = std::max(worst_feasibility, 0.0);

  for (const auto& e : report.coupling->entries()) {
    const double c = cost(e.tuple);
    const double gap = is_finite_cost(c) ? std::abs(report.potentials.sum(e.tuple) - c)
                                         : std::numeric_limits<double>::infinity();
    cert.max_equality_violation = std::max(cert.max_equality_violation, gap);
    if (gap > tol) record(SplittingViolation::Kind::equality, e.tuple, gap);
  }
  cert.value_gap = std::abs(report.potentials.value(report.coupling->axes()) - report.value);
  cert.valid = cert.max_feasibility_violation <= tol && cert.max_equality_violation <= tol &&
               cert.value_gap <= std::max(tol, kDualityTolerance);
  return cert;
}

std::vector<IndexTuple> support(const Coupling& gamma, double mass_tol) {
  std::vector<IndexTuple> out;
  for (const auto& e : gamma.entries())
    if (e.mass > mass_tol) out.push_back(e.tuple);
  return out;
}

MongeDiagnostics monge_diagnostics(const Coupling& gamma, double mass_tol) {
  MongeDiagnostics diag;
  const Index atoms = gamma.axis(0).size();
  std::vector<Index> partners(static_cast<std::size_t>(atoms), 0);
  std::vector<const IndexTuple*> last(static_cast<std::size_t>(atoms), nullptr);
  for (const auto& e : gamma.entries()) {
    if (e.mass <= mass_tol) continue;
    const auto a = static_cast<std::size_t>(e.tuple[0]);
    ++partners[a];
    last[a] = &e.tuple;
  }
  const Vector mass = marginal_weights(gamma, 0);
  diag.maps.assign(static_cast<std::size_t>(gamma.order() - 1),
                   std::vector<std::optional<Index>>(static_cast<std::size_t>(atoms)));
  double graphical = 0.0;
  for (Index a = 0; a < atoms; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    diag.max_partners = std::max(diag.max_partners, partners[ua]);
    if (partners[ua] != 1) continue;
    graphical += mass[a];
    for (Index k = 1; k < gamma.order(); ++k)
      diag.maps[static_cast<std::size_t>(k - 1)][ua] = (*last[ua])[static_cast<std::size_t>(k)];
  }
  diag.graphical_fraction = std::clamp(graphical / mass.sum(), 0.0, 1.0);
  diag.graphical = diag.graphical_fraction >= kGraphicalThreshold;
  return diag;
}

ProbeReport uniqueness_probe(const CostTensor& cost, const std::vector<Measure>& marginals,
                             const ProbeOptions& options) {
  if (options.trials < 2) throw std::invalid_argument("uniqueness_probe: trials must be >= 2");
  if (options.delta < 0.0) throw std::invalid_argument("uniqueness_probe: delta must be >= 0");

  ProbeReport report;
  const double range = cost.max_finite() - cost.min_finite();
  report.perturbation = options.delta * (range > 0.0 ? range : 1.0);

  // Perturbations and orders are drawn up front, in trial order, so the
  // outcome does not depend on how the solves are scheduled.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<CostTensor> costs;
  std::vector<LpOptions> lp(static_cast<std::size_t>(options.trials), options.lp);
  costs.push_back(cost);
  for (int trial = 1; trial < options.trials; ++trial) {
    CostTensor perturbed = cost;
    for (Index i = 0; i < perturbed.size(); ++i)
      if (perturbed.is_finite(i)) perturbed.values()[i] += report.perturbation * unit(rng);
    costs.push_back(std::move(perturbed));
    auto& order = lp[static_cast<std::size_t>(trial)].column_order;
    order.resize(static_cast<std::size_t>(cost.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::future<SolveReport>> pending;
  for (int trial = 0; trial < options.trials; ++trial)
    pending.push_back(std::async(std::launch::async, [&, trial] {
      return solve_lp(costs[static_cast<std::size_t>(trial)], marginals,
                      lp[static_cast<std::size_t>(trial)]);
    }));

  report.all_certified = true;
  report.supports_identical = true;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int trial = 0; trial < options.trials; ++trial) {
    const SolveReport r = pending[static_cast<std::size_t>(trial)].get();
    report.statuses.push_back(r.status);
    if (!r.optimal()) {
      report.all_certified = false;
      report.supports_identical = false;
      report.supports.emplace_back();
      report.values.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    report.max_duality_gap = std::max(report.max_duality_gap, r.duality_gap());
    if (!verify_splitting(r, costs[static_cast<std::size_t>(trial)]).valid)
      report.all_certified = false;
    report.supports.push_back(support(*r.coupling, options.mass_tol));
    const double v = expected_cost(*r.coupling, cost);
    report.values.push_back(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (report.supports.back() != report.supports.front()) report.supports_identical = false;
  }
  report.value_spread = hi >= lo ? hi - lo : 0.0;
  report.unique = report.supports_identical &&
                  report.value_spread <= 2.0 * report.perturbation + 1e-9;
  return report;
}

double product_bilinear_value(const std::vector<Measure>& marginals, int n_alpha) {
  if (n_alpha < 1 || n_alpha >= static_cast<int>(marginals.size()))
    throw std::invalid_argument("product_bilinear_value: n_alpha must split the marginals");
  const Index d = marginals.front().dim();
  Vector x = Vector::Zero(d), y = Vector::Zero(d);
  for (int i = 0; i < static_cast<int>(marginals.size()); ++i) {
    const auto& m = marginals[static_cast<std::size_t>(i)];
    if (m.dim() != d) throw std::invalid_argument("product_bilinear_value: dimension mismatch");
    (i < n_alpha ? x : y) += mean(m);
  }
  return x.dot(star(y));
}

}  // namespace mmot
