#include "mmot/cost_tensor.hpp"

#include <stdexcept>
#include <string>

namespace mmot {

std::string to_string(CostFamily family) {
  switch (family) {
    case CostFamily::coulomb: return "coulomb";
    case CostFamily::coulomb_eta: return "coulomb_eta";
    case CostFamily::harmonic: return "harmonic";
    case CostFamily::bilinear: return "bilinear";
  }
  return "unknown";
}

CostFamily parse_cost_family(const std::string& name) {
  if (name == "coulomb") return CostFamily::coulomb;
  if (name == "coulomb_eta") return CostFamily::coulomb_eta;
  if (name == "harmonic") return CostFamily::harmonic;
  if (name == "bilinear") return CostFamily::bilinear;
  throw std::invalid_argument("unknown cost family '" + name + "'");
}

void CostSpec::validate() const {
  if (d < 1) throw std::invalid_argument("cost: d must be >= 1");
  if (family == CostFamily::coulomb) {
    if (n_alpha < 1 || n_beta < 0 || order() < 2)
      throw std::invalid_argument("cost: coulomb needs at least two electrons");
    return;
  }
  if (n_alpha < 1 || n_beta < 1)
    throw std::invalid_argument("cost: Na and Nb must be >= 1 for two-molecule families");
  if (family == CostFamily::coulomb_eta && !(eta > 0.0))
    throw std::invalid_argument("cost: coulomb_eta needs eta > 0");
}

CostTensor::CostTensor(std::vector<Index> shape, Vector values)
    : shape_(std::move(shape)), strides_(shape_.size()), values_(std::move(values)) {
  Index stride = 1;
  for (std::size_t k = shape_.size(); k-- > 0;) {
    if (shape_[k] < 1) throw std::invalid_argument("cost tensor: empty axis");
    strides_[k] = stride;
    stride *= shape_[k];
  }
  if (stride != values_.size())
    throw std::invalid_argument("cost tensor: value count does not match shape");
}

Index CostTensor::flat_index(const IndexTuple& t) const {
  if (t.size() != shape_.size()) throw std::invalid_argument("cost tensor: tuple length mismatch");
  Index flat = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < 0 || t[k] >= shape_[k]) throw std::out_of_range("cost tensor: index out of range");
    flat += t[k] * strides_[k];
  }
  return flat;
}

IndexTuple CostTensor::tuple(Index flat) const {
  IndexTuple t(shape_.size());
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    t[k] = flat / strides_[k];
    flat %= strides_[k];
  }
  return t;
}

Index CostTensor::finite_count() const {
  Index n = 0;
  for (Index i = 0; i < size(); ++i) n += is_finite(i) ? 1 : 0;
  return n;
}

double CostTensor::min_finite() const {
  bool any = false;
  double best = 0.0;
  for (Index i = 0; i < size(); ++i)
    if (is_finite(i) && (!any || values_[i] < best)) {
      best = values_[i];
      any = true;
    }
  return best;
}

double CostTensor::max_finite() const {
  bool any = false;
  double best = 0.0;
  for (Index i = 0; i < size(); ++i)
    if (is_finite(i) && (!any || values_[i] > best)) {
      best = values_[i];
      any = true;
    }
  return best;
}

Index checked_product_size(const std::vector<Measure>& marginals, Index cap) {
  if (marginals.empty()) throw std::invalid_argument("cost tensor: no marginals");
  Index total = 1;
  for (const auto& m : marginals) {
    if (m.dim() != marginals.front().dim())
      throw std::invalid_argument("cost tensor: marginals differ in dimension");
    if (total > cap / m.size())
      throw std::length_error("cost tensor: product of support sizes exceeds cap " +
                              std::to_string(cap));
    total *= m.size();
  }
  if (total > cap)
    throw std::length_error("cost tensor: product of support sizes exceeds cap " +
                            std::to_string(cap));
  return total;
}

CostTensor tabulate(const std::vector<Measure>& marginals,
                    const std::function<double(const Matrix&)>& f, Index cap) {
  const Index total = checked_product_size(marginals, cap);
  std::vector<Index> shape;
  for (const auto& m : marginals) shape.push_back(m.size());
  Vector values(total);
  Matrix z(marginals.front().dim(), static_cast<Index>(marginals.size()));
  IndexTuple t(marginals.size(), 0);
  for (std::size_t k = 0; k < marginals.size(); ++k) z.col(static_cast<Index>(k)) = marginals[k].point(0);
  for (Index flat = 0; flat < total; ++flat) {
    values[flat] = f(z);
    // odometer increment, last axis fastest
    for (std::size_t k = marginals.size(); k-- > 0;) {
      if (++t[k] < shape[k]) {
        z.col(static_cast<Index>(k)) = marginals[k].point(t[k]);
        break;
      }
      t[k] = 0;
      z.col(static_cast<Index>(k)) = marginals[k].point(0);
    }
  }
  return CostTensor(std::move(shape), std::move(values));
}

double evaluate_cost(const CostSpec& spec, const Matrix& z) {
  const Index na = spec.n_alpha;
  switch (spec.family) {
    case CostFamily::coulomb: return coulomb_total(z);
    case CostFamily::coulomb_eta: return coulomb_eta(z.leftCols(na), z.rightCols(spec.n_beta), spec.eta);
    case CostFamily::harmonic: return harmonic_cost(z.leftCols(na), z.rightCols(spec.n_beta));
    case CostFamily::bilinear: return bilinear_cost(z.leftCols(na), z.rightCols(spec.n_beta));
  }
  throw std::logic_error("unhandled cost family");
}

CostTensor cost_tensor(const CostSpec& spec, const std::vector<Measure>& marginals, Index cap) {
  spec.validate();
  if (static_cast<int>(marginals.size()) != spec.order())
    throw std::invalid_argument("cost tensor: expected " + std::to_string(spec.order()) +
                                " marginals, got " + std::to_string(marginals.size()));
  for (const auto& m : marginals)
    if (m.dim() != spec.d)
      throw std::invalid_argument("cost tensor: marginal dimension differs from cost d");
  if (spec.family == CostFamily::coulomb_eta) {
    // Eager admissibility: name the offending atoms before tabulating anything.
    for (int i = 0; i < spec.n_alpha; ++i)
      for (int j = spec.n_alpha; j < spec.order(); ++j) {
        try {
          check_eta_admissible(marginals[static_cast<std::size_t>(i)],
                               marginals[static_cast<std::size_t>(j)], spec.eta);
        } catch (const std::domain_error& e) {
          throw std::domain_error(std::string(e.what()) + " (axes " + std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
        }
      }
  }
  return tabulate(marginals, [&spec](const Matrix& z) { return evaluate_cost(spec, z); }, cap);
}

double expected_cost(const Coupling& gamma, const CostTensor& cost) {
  if (gamma.order() != cost.order())
    throw std::invalid_argument("expected_cost: coupling and cost tensor differ in order");
  double total = 0.0;
  for (const auto& e : gamma.entries()) {
    const double c = cost(e.tuple);
    if (!is_finite_cost(c)) return infinite_cost();
    total += e.mass * c;
  }
  return total;
}

}  // namespace mmot
