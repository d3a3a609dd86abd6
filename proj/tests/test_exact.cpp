#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmot/exact_solver.hpp"
#include "oracles.hpp"

#include <numeric>
#include <random>

using namespace mmot;
using oracle::line_measure;

namespace {

const Measure kBit = line_measure({0, 1}, {1, 1});

CostSpec bilinear(int na, int nb, int d = 1) { return CostSpec{CostFamily::bilinear, na, nb, 0.0, d}; }

void check_certified(const SolveReport& r, const CostTensor& cost) {
  REQUIRE(r.optimal());
  CHECK(r.duality_gap() <= kDualityTolerance);
  const auto cert = verify_splitting(r, cost);
  CHECK(cert.valid);
  CHECK(cert.max_feasibility_violation <= 1e-8);
  CHECK(cert.max_equality_violation <= 1e-8);
}

Measure jittered(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> jit(-0.25, 0.25);
  Matrix p(1, n);
  for (Index i = 0; i < n; ++i) p(0, i) = (i + 0.5) / n - 0.5 + jit(rng) / n;
  return Measure(p, Vector::Constant(n, 1.0 / n));
}

}  // namespace

TEST_CASE("2x2 bilinear optimum is the identity pairing") {
  const std::vector<Measure> ms{kBit, kBit};
  const CostTensor cost = cost_tensor(bilinear(1, 1), ms);
  const SolveReport r = solve_lp(cost, ms);
  check_certified(r, cost);
  CHECK(r.value == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(support(*r.coupling) == std::vector<IndexTuple>{{0, 0}, {1, 1}});
  CHECK(r.coupling->entries()[0].mass == doctest::Approx(0.5));
  CHECK(is_feasible(*r.coupling));
  CHECK(r.value == doctest::Approx(oracle::vertex_minimum(ms, [&](const IndexTuple& t) { return cost(t); })));
}

TEST_CASE("three marginal bilinear instance and its Monge map") {
  const std::vector<Measure> ms{kBit, kBit, kBit};
  const CostTensor cost = cost_tensor(bilinear(2, 1), ms);
  const SolveReport r = solve_lp(cost, ms);
  check_certified(r, cost);
  CHECK(r.value == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(support(*r.coupling) == std::vector<IndexTuple>{{0, 0, 0}, {1, 1, 1}});
  CHECK(r.value == doctest::Approx(oracle::vertex_minimum(ms, [&](const IndexTuple& t) { return cost(t); })));

  const MongeDiagnostics diag = monge_diagnostics(*r.coupling);
  CHECK(diag.graphical_fraction == doctest::Approx(1.0));
  CHECK(diag.graphical);
  CHECK(diag.max_partners == 1);
  REQUIRE(diag.maps.size() == 2);
  for (const auto& map : diag.maps) {
    CHECK(map[0] == std::optional<Index>(0));
    CHECK(map[1] == std::optional<Index>(1));
  }
}

TEST_CASE("Dirac marginals give the single tuple") {
  Vector a(2), b(2), c(2);
  a << 1, 2;
  b << -1, 0.5;
  c << 3, -2;
  const std::vector<Measure> ms{Measure::dirac(a), Measure::dirac(b), Measure::dirac(c)};
  const CostTensor cost = cost_tensor(bilinear(2, 1, 2), ms);
  const SolveReport r = solve_lp(cost, ms);
  check_certified(r, cost);
  CHECK(r.value == doctest::Approx(cost[0]));
  REQUIRE(r.coupling->entries().size() == 1);
  CHECK(r.coupling->entries()[0].mass == doctest::Approx(1.0));
}

TEST_CASE("LP matches vertex enumeration on random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const Index d = 1 + trial % 2;
    std::vector<Measure> ms{oracle::random_measure(rng, d, 2 + trial % 2),
                            oracle::random_measure(rng, d, 3), oracle::random_measure(rng, d, 2)};
    const CostSpec spec{trial % 3 == 0 ? CostFamily::harmonic : CostFamily::bilinear, 2, 1, 0.0,
                        static_cast<int>(d)};
    const CostTensor cost = cost_tensor(spec, ms);
    const SolveReport r = solve_lp(cost, ms);
    check_certified(r, cost);
    const double best = oracle::vertex_minimum(ms, [&](const IndexTuple& t) { return cost(t); });
    CHECK(r.value == doctest::Approx(best).epsilon(1e-10));
    Index rows = 0;
    for (const auto& m : ms) rows += m.size();
    CHECK(static_cast<Index>(r.coupling->entries().size()) <= rows - 3 + 1);
  }
}

TEST_CASE("masked entries and infeasibility") {
  const std::vector<Measure> ms{kBit, kBit};
  const CostTensor coul = cost_tensor(CostSpec{CostFamily::coulomb, 2, 0, 0.0, 1}, ms);
  const SolveReport r = solve_lp(coul, ms);
  check_certified(r, coul);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(support(*r.coupling) == std::vector<IndexTuple>{{0, 1}, {1, 0}});

  const Measure one = Measure::dirac(Vector::Zero(1));
  const CostTensor dead = cost_tensor(CostSpec{CostFamily::coulomb, 2, 0, 0.0, 1}, {one, one});
  const SolveReport bad = solve_lp(dead, {one, one});
  CHECK(bad.status == SolveStatus::infeasible);
  CHECK_FALSE(bad.coupling);
  CHECK_FALSE(bad.message.empty());

  // Three atoms, uneven masses: the heavy atom cannot avoid itself.
  const Measure heavy = line_measure({0, 1, 2}, {0.6, 0.2, 0.2});
  const CostTensor c3 = cost_tensor(CostSpec{CostFamily::coulomb, 2, 0, 0.0, 1}, {heavy, heavy});
  CHECK(solve_lp(c3, {heavy, heavy}).status == SolveStatus::infeasible);
}

TEST_CASE("pivot limit is reported") {
  std::mt19937_64 rng(4);
  const std::vector<Measure> ms{oracle::random_measure(rng, 1, 4), oracle::random_measure(rng, 1, 4)};
  const CostTensor cost = cost_tensor(bilinear(1, 1), ms);
  LpOptions opts;
  opts.pivot_limit = 1;
  CHECK(solve_lp(cost, ms, opts).status == SolveStatus::pivot_limit);
}

TEST_CASE("column order does not change the optimal value") {
  std::mt19937_64 rng(19);
  const std::vector<Measure> ms{oracle::random_measure(rng, 2, 3), oracle::random_measure(rng, 2, 3),
                                oracle::random_measure(rng, 2, 2)};
  const CostTensor cost = cost_tensor(bilinear(2, 1, 2), ms);
  const SolveReport natural = solve_lp(cost, ms);
  LpOptions opts;
  opts.column_order.resize(static_cast<std::size_t>(cost.size()));
  std::iota(opts.column_order.rbegin(), opts.column_order.rend(), Index{0});
  const SolveReport reversed = solve_lp(cost, ms, opts);
  check_certified(reversed, cost);
  CHECK(reversed.value == doctest::Approx(natural.value).epsilon(1e-12));

  opts.column_order.pop_back();
  CHECK_THROWS_AS(solve_lp(cost, ms, opts), std::invalid_argument);
}

TEST_CASE("splitting certificate detects perturbed potentials") {
  const std::vector<Measure> ms{kBit, kBit};
  const CostTensor cost = cost_tensor(bilinear(1, 1), ms);
  SolveReport r = solve_lp(cost, ms);
  REQUIRE(verify_splitting(r, cost).valid);
  r.potentials.tables[0][1] += 1.0;
  const auto cert = verify_splitting(r, cost);
  CHECK_FALSE(cert.valid);
  CHECK(cert.max_feasibility_violation == doctest::Approx(1.0));
  CHECK_FALSE(cert.violations.empty());

  const CostTensor zero({2, 2}, Vector::Zero(4));
  SolveReport trivial;
  trivial.status = SolveStatus::optimal;
  trivial.coupling = independent_coupling(ms);
  trivial.potentials.tables = {Vector::Zero(2), Vector::Zero(2)};
  CHECK(verify_splitting(trivial, zero).valid);
}

TEST_CASE("Monge diagnostics of product couplings") {
  const Measure three = line_measure({0, 1, 2}, {1, 2, 1});
  const MongeDiagnostics spread = monge_diagnostics(independent_coupling<double>({kBit, three}));
  CHECK(spread.graphical_fraction == 0.0);
  CHECK_FALSE(spread.graphical);
  CHECK(spread.max_partners == 3);
  CHECK_FALSE(spread.maps[0][0]);

  const Measure dirac = Measure::dirac(Vector::Constant(1, 4.0));
  const MongeDiagnostics onto = monge_diagnostics(independent_coupling<double>({three, dirac}));
  CHECK(onto.graphical_fraction == doctest::Approx(1.0));
  CHECK(onto.graphical);
  for (const auto& t : onto.maps[0]) CHECK(t == std::optional<Index>(0));

  // One atom split, one mapped: fraction is the mapped mass.
  const Coupling half({kBit, kBit}, {{{0, 0}, 0.25}, {{0, 1}, 0.25}, {{1, 1}, 0.5}});
  CHECK(monge_diagnostics(half).graphical_fraction == doctest::Approx(0.5));
}

TEST_CASE("uniqueness probe") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    const std::vector<Measure> ms{jittered(rng, 4), jittered(rng, 4), jittered(rng, 4)};
    const CostTensor cost = cost_tensor(bilinear(2, 1), ms);
    ProbeOptions opts;
    opts.seed = 100 + static_cast<std::uint64_t>(trial);
    const ProbeReport p = uniqueness_probe(cost, ms, opts);
    CHECK(p.unique);
    CHECK(p.supports_identical);
    CHECK(p.all_certified);
    CHECK(p.supports.size() == 5);
  }

  const Measure x = line_measure({0, 0.4, 1}, {1, 2, 3});
  const std::vector<Measure> degenerate{x, x, Measure::dirac(Vector::Ones(1))};
  const CostTensor dcost = cost_tensor(bilinear(2, 1), degenerate);
  ProbeOptions opts;
  opts.seed = 5;
  opts.trials = 6;
  const ProbeReport dp = uniqueness_probe(dcost, degenerate, opts);
  CHECK_FALSE(dp.unique);
  CHECK_FALSE(dp.supports_identical);
  CHECK(dp.value_spread <= 1e-12);

  ProbeOptions same;
  same.trials = 2;
  same.delta = 0.0;
  same.seed = 9;
  const ProbeReport a = uniqueness_probe(dcost, degenerate, same);
  const ProbeReport b = uniqueness_probe(dcost, degenerate, same);
  CHECK(a.supports == b.supports);
  CHECK(a.values == b.values);
  CHECK(a.unique == b.unique);

  same.trials = 1;
  CHECK_THROWS_AS(uniqueness_probe(dcost, degenerate, same), std::invalid_argument);
}

TEST_CASE("product_bilinear_value") {
  CHECK(product_bilinear_value({kBit, kBit}, 1) == doctest::Approx(-0.5));
  const Measure sym = line_measure({-1, 1}, {1, 1});
  CHECK(product_bilinear_value({sym, kBit, kBit}, 1) == 0.0);

  const Measure x = line_measure({0, 0.4, 1}, {1, 2, 3});
  const std::vector<Measure> ms{x, kBit, Measure::dirac(Vector::Constant(1, 2.0))};
  const CostTensor cost = cost_tensor(bilinear(2, 1), ms);
  CHECK(product_bilinear_value(ms, 2) == doctest::Approx(solve_lp(cost, ms).value).epsilon(1e-12));

  // Integrating the cost against random product plans.
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<Measure> xs{oracle::random_measure(rng, 2, 3), oracle::random_measure(rng, 2, 2)};
    const std::vector<Measure> ys{oracle::random_measure(rng, 2, 3)};
    std::vector<std::vector<Index>> ox, oy;
    for (const auto& m : xs) {
      std::vector<Index> o(static_cast<std::size_t>(m.size()));
      std::iota(o.begin(), o.end(), Index{0});
      std::shuffle(o.begin(), o.end(), rng);
      ox.push_back(o);
    }
    oy.push_back({2, 0, 1});
    const Coupling plan = product(northwest_corner(xs, ox), northwest_corner(ys, oy));
    const double direct = expectation(plan, [](const Matrix& z) {
      return oracle::bilinear(z.leftCols(2), z.rightCols(1));
    });
    CHECK(direct == doctest::Approx(product_bilinear_value({xs[0], xs[1], ys[0]}, 2)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(product_bilinear_value({kBit}, 1), std::invalid_argument);
}

TEST_CASE("bilinear and harmonic share argmin") {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 5; ++trial) {
    const std::vector<Measure> ms{jittered(rng, 3), jittered(rng, 4), jittered(rng, 3)};
    const CostTensor b = cost_tensor(bilinear(2, 1), ms);
    const CostTensor h = cost_tensor(CostSpec{CostFamily::harmonic, 2, 1, 0.0, 1}, ms);
    const SolveReport rb = solve_lp(b, ms), rh = solve_lp(h, ms);
    check_certified(rb, b);
    check_certified(rh, h);
    CHECK(support(*rb.coupling) == support(*rh.coupling));
    CHECK(rh.value - rb.value == doctest::Approx(quad_bilinear_constant(ms, 2)).epsilon(1e-8));
  }
}
