#include "mmot/entropic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmot {

std::string to_string(EntropicStatus status) {
  switch (status) {
    case EntropicStatus::converged: return "converged";
    case EntropicStatus::max_iter: return "max_iter";
    case EntropicStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Walks all tuples of a shape in flat order, last axis fastest.
class Odometer {
 public:
  explicit Odometer(const std::vector<Index>& shape) : shape_(shape), t_(shape.size(), 0) {}
  const IndexTuple& tuple() const { return t_; }
  void next() {
    for (std::size_t k = shape_.size(); k-- > 0;) {
      if (++t_[k] < shape_[k]) return;
      t_[k] = 0;
    }
  }

 private:
  const std::vector<Index>& shape_;
  IndexTuple t_;
};

struct Problem {
  const CostTensor& cost;
  const std::vector<Measure>& marginals;
  double epsilon;
  Vector log_kernel;  // -c/eps + sum_k log rho_k, -inf where masked
  std::vector<Vector> log_weights;
};

Problem make_problem(const CostTensor& cost, const std::vector<Measure>& marginals,
                     double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
  if (static_cast<Index>(marginals.size()) != cost.order())
    throw std::invalid_argument("sinkhorn: expected one marginal per cost axis");
  for (std::size_t k = 0; k < marginals.size(); ++k)
    if (marginals[k].size() != cost.shape()[k])
      throw std::invalid_argument("sinkhorn: marginal " + std::to_string(k) +
                                  " does not match cost axis size");
  Problem p{cost, marginals, epsilon, Vector(cost.size()), {}};
  for (const auto& m : marginals) {
    Vector lw(m.size());
    for (Index a = 0; a < m.size(); ++a) lw[a] = m.weight(a) > 0.0 ? std::log(m.weight(a)) : kNegInf;
    p.log_weights.push_back(std::move(lw));
  }
  Odometer it(cost.shape());
  for (Index flat = 0; flat < cost.size(); ++flat, it.next()) {
    if (!cost.is_finite(flat)) {
      p.log_kernel[flat] = kNegInf;
      continue;
    }
    double v = -cost[flat] / epsilon;
    for (std::size_t k = 0; k < marginals.size(); ++k) v += p.log_weights[k][it.tuple()[k]];
    p.log_kernel[flat] = v;
  }
  return p;
}

// log gamma(t) with every potential except `skip` (pass -1 for all).
double log_mass(const Problem& p, const std::vector<Vector>& phi, Index flat, const IndexTuple& t,
                Index skip) {
  double v = p.log_kernel[flat];
  if (v == kNegInf) return v;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (static_cast<Index>(k) != skip) v += phi[k][t[k]] / p.epsilon;
  return v;
}

// Exact update of one potential so that its marginal matches. Returns false if
// an atom with positive mass sees no finite entry.
bool update_axis(const Problem& p, std::vector<Vector>& phi, Index axis) {
  const auto k = static_cast<std::size_t>(axis);
  const Index n = p.marginals[k].size();
  Vector peak = Vector::Constant(n, kNegInf);
  {
    Odometer it(p.cost.shape());
    for (Index flat = 0; flat < p.cost.size(); ++flat, it.next()) {
      const double v = log_mass(p, phi, flat, it.tuple(), axis);
      const Index a = it.tuple()[k];
      if (v > peak[a]) peak[a] = v;
    }
  }
  Vector acc = Vector::Zero(n);
  {
    Odometer it(p.cost.shape());
    for (Index flat = 0; flat < p.cost.size(); ++flat, it.next()) {
      const Index a = it.tuple()[k];
      if (peak[a] == kNegInf) continue;
      const double v = log_mass(p, phi, flat, it.tuple(), axis);
      if (v != kNegInf) acc[a] += std::exp(v - peak[a]);
    }
  }
  for (Index a = 0; a < n; ++a) {
    if (p.log_weights[k][a] == kNegInf) {
      phi[k][a] = 0.0;
      continue;
    }
    if (peak[a] == kNegInf) return false;
    phi[k][a] = -p.epsilon * (peak[a] + std::log(acc[a]) - p.log_weights[k][a]);
  }
  return true;
}

struct Evaluation {
  double value = 0.0;
  double marginal_error = 0.0;
};

Evaluation evaluate(const Problem& p, const std::vector<Vector>& phi) {
  std::vector<Vector> marg;
  for (const auto& m : p.marginals) marg.push_back(Vector::Zero(m.size()));
  Evaluation e;
  Odometer it(p.cost.shape());
  for (Index flat = 0; flat < p.cost.size(); ++flat, it.next()) {
    const double v = log_mass(p, phi, flat, it.tuple(), -1);
    if (v == kNegInf) continue;
    const double g = std::exp(v);
    e.value += g * p.cost[flat];
    for (std::size_t k = 0; k < marg.size(); ++k) marg[k][it.tuple()[k]] += g;
  }
  for (std::size_t k = 0; k < marg.size(); ++k)
    e.marginal_error =
        std::max(e.marginal_error, (marg[k] - p.marginals[k].weights()).cwiseAbs().sum());
  return e;
}

}  // namespace

EntropicResult solve_sinkhorn(const CostTensor& cost, const std::vector<Measure>& marginals,
                              double epsilon, const EntropicOptions& options,
                              const std::vector<Vector>* warm_start) {
  const Problem p = make_problem(cost, marginals, epsilon);
  EntropicResult result;
  result.state.epsilon = epsilon;
  auto& phi = result.state.potentials;
  if (warm_start) {
    if (warm_start->size() != marginals.size())
      throw std::invalid_argument("sinkhorn: warm start has wrong number of potentials");
    phi = *warm_start;
  } else {
    for (const auto& m : marginals) phi.push_back(Vector::Zero(m.size()));
  }

  Evaluation eval = evaluate(p, phi);
  for (Index iter = 0; iter < options.max_iter; ++iter) {
    for (Index k = 0; k < cost.order(); ++k) {
      if (!update_axis(p, phi, k)) {
        result.status = EntropicStatus::infeasible;
        result.state.iterations = iter;
        return result;
      }
    }
    eval = evaluate(p, phi);
    result.state.iterations = iter + 1;
    result.state.error_history.push_back(eval.marginal_error);
    if (eval.marginal_error <= options.tol) {
      result.status = EntropicStatus::converged;
      break;
    }
  }
  result.value = eval.value;
  result.marginal_error = eval.marginal_error;
  return result;
}

ScheduleResult epsilon_schedule_solve(const CostTensor& cost,
                                      const std::vector<Measure>& marginals,
                                      const std::vector<double>& epsilons,
                                      const EntropicOptions& options) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon schedule is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw std::invalid_argument("epsilon schedule: values must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw std::invalid_argument("epsilon schedule must be strictly decreasing");
  }
  ScheduleResult out;
  const std::vector<Vector>* warm = nullptr;
  for (double eps : epsilons) {
    EntropicResult r = solve_sinkhorn(cost, marginals, eps, options, warm);
    out.epsilons.push_back(eps);
    out.values.push_back(r.value);
    out.statuses.push_back(r.status);
    out.final = std::move(r);
    if (out.final.status == EntropicStatus::infeasible) break;
    warm = &out.final.state.potentials;
  }
  return out;
}

Vector implied_coupling(const CostTensor& cost, const std::vector<Measure>& marginals,
                        const EntropicState& state) {
  const Problem p = make_problem(cost, marginals, state.epsilon);
  Vector gamma = Vector::Zero(cost.size());
  Odometer it(cost.shape());
  for (Index flat = 0; flat < cost.size(); ++flat, it.next()) {
    const double v = log_mass(p, state.potentials, flat, it.tuple(), -1);
    if (v != kNegInf) gamma[flat] = std::exp(v);
  }
  return gamma;
}

Coupling to_coupling(const CostTensor& cost, const std::vector<Measure>& marginals,
                     const EntropicState& state, double drop) {
  const Vector gamma = implied_coupling(cost, marginals, state);
  double kept = 0.0;
  for (Index i = 0; i < gamma.size(); ++i)
    if (gamma[i] > drop) kept += gamma[i];
  std::vector<Coupling::Entry> entries;
  for (Index i = 0; i < gamma.size(); ++i)
    if (gamma[i] > drop) entries.push_back({cost.tuple(i), gamma[i] / kept});
  return Coupling(marginals, std::move(entries));
}

}  // namespace mmot
