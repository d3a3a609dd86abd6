#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mmot/coupling.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace mmot;
using oracle::line_measure;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Coupling random_coupling(std::mt19937_64& rng, const std::vector<Measure>& marginals) {
  std::vector<std::vector<Index>> orders;
  for (const auto& m : marginals) {
    std::vector<Index> o(static_cast<std::size_t>(m.size()));
    std::iota(o.begin(), o.end(), Index{0});
    std::shuffle(o.begin(), o.end(), rng);
    orders.push_back(std::move(o));
  }
  return northwest_corner(marginals, orders);
}

}  // namespace

TEST_CASE("star flips and doubles the first coordinate") {
  CHECK(star(vec({1, 1})) == vec({-2, 1}));
  CHECK(star(vec({0, 0, 0})) == vec({0, 0, 0}));
  CHECK(star(vec({-1, 2, 3})) == vec({2, 2, 3}));
  const Vector u = vec({0.3, -1.2}), v = vec({2.5, 0.7});
  CHECK((star(Vector(2.0 * u - 3.0 * v)) - (2.0 * star(u) - 3.0 * star(v))).norm() < 1e-14);
  CHECK_THROWS_AS(star(Vector(0)), std::invalid_argument);
}

TEST_CASE("construction validates and canonicalizes") {
  Matrix p(1, 2);
  p << 0, 1;
  CHECK_THROWS_AS(Measure(p, vec({0.5, 0.6})), std::invalid_argument);
  CHECK_THROWS_AS(Measure(p, vec({1.5, -0.5})), std::invalid_argument);
  CHECK_THROWS_AS(Measure(p, vec({1.0})), std::invalid_argument);

  const Measure within(p, vec({0.5, 0.5 + 5e-13}));
  CHECK(std::abs(within.weights().sum() - 1.0) < 1e-15);

  Matrix dup(1, 3);
  dup << 2, 0, 2;
  const Measure merged(dup, vec({0.25, 0.5, 0.25}));
  REQUIRE(merged.size() == 2);
  CHECK(merged.point(0)[0] == 2.0);
  CHECK(merged.weight(0) == doctest::Approx(0.5));
  CHECK(merged.point(1)[0] == 0.0);
}

TEST_CASE("translate") {
  const Measure d0 = Measure::dirac(Vector::Zero(3));
  const Measure moved = translate(d0, molecule_offset<double>(3, 1.0));
  CHECK(moved.point(0) == vec({0.5, 0, 0}));

  const Measure two = line_measure({0, 1}, {0.5, 0.5});
  const Measure left = translate(two, vec({-1}));
  CHECK(left.points() == Matrix(two.points().array() - 1.0));
  CHECK(left.weights() == two.weights());

  std::mt19937_64 rng(7);
  const Measure m = oracle::random_measure(rng, 2, 4);
  const Vector s = vec({0.25, -0.75});
  CHECK(translate(translate(m, s), Vector(-s)) == m);
  CHECK_THROWS_AS(translate(m, vec({1})), std::invalid_argument);
}

TEST_CASE("mixture_rho_eta") {
  const Measure d0 = Measure::dirac(Vector::Zero(1));
  const Measure even = mixture_rho_eta(d0, d0, 1, 1, 1.0);
  REQUIRE(even.size() == 2);
  CHECK(even.point(0)[0] == 0.5);
  CHECK(even.weight(0) == doctest::Approx(0.5));
  CHECK(even.point(1)[0] == -0.5);

  const Measure skew = mixture_rho_eta(d0, d0, 3, 1, 1.0);
  CHECK(skew.point(0)[0] == 0.5);
  CHECK(skew.weight(0) == doctest::Approx(0.75));
  CHECK(skew.weight(1) == doctest::Approx(0.25));

  // alpha atom 0 lands at 0.5, beta atom 1 lands at -0.5 + 1 = 0.5: they merge.
  const Measure a = line_measure({0, 2}, {0.5, 0.5});
  const Measure b = line_measure({-1, 1}, {0.5, 0.5});
  const Measure overlap = mixture_rho_eta(a, b, 1, 1, 1.0);
  CHECK(overlap.size() == 3);
  const auto at = overlap.find(vec({0.5}));
  REQUIRE(at);
  CHECK(overlap.weight(*at) == doctest::Approx(0.5));

  CHECK_THROWS_AS(mixture_rho_eta(d0, d0, 1, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mixture_rho_eta(d0, d0, 0, 1, 1.0), std::invalid_argument);
}

TEST_CASE("moments") {
  const Measure sym = line_measure({-1, 1}, {0.5, 0.5});
  CHECK(first_coordinate_mean(sym) == 0.0);
  CHECK(second_moment(sym) == doctest::Approx(1.0));

  const Vector a = vec({1.5, -2.0});
  const Measure da = Measure::dirac(a);
  CHECK(mean(da) == a);
  CHECK(second_moment(da) == doctest::Approx(a.squaredNorm()));
  CHECK(first_coordinate_second_moment(da) == doctest::Approx(2.25));

  const Measure u3 = line_measure({0, 1, 2}, {1, 1, 1});
  CHECK(first_coordinate_mean(u3) == doctest::Approx(1.0));
  CHECK(second_moment(u3) == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("coupling construction") {
  const Measure m = line_measure({0, 1}, {0.5, 0.5});
  CHECK_THROWS_AS(Coupling({m, m}, {{{0, 0}, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(Coupling({m, m}, {{{0, 2}, 1.0}}), std::out_of_range);
  CHECK_THROWS_AS(Coupling({m, m}, {{{0}, 1.0}}), std::invalid_argument);
  const Coupling g({m, m}, {{{1, 0}, 0.25}, {{0, 1}, 0.5}, {{1, 0}, 0.25}, {{1, 1}, 0.0}});
  REQUIRE(g.entries().size() == 2);
  CHECK(g.entries()[0].tuple == IndexTuple{0, 1});
  CHECK(g.entries()[1].mass == doctest::Approx(0.5));
}

TEST_CASE("product and marginals") {
  const Measure a = line_measure({0, 1, 3}, {0.2, 0.3, 0.5});
  const Measure b = line_measure({-1, 2}, {0.6, 0.4});
  const Coupling ga = independent_coupling(std::vector<Measure>{a});
  const Coupling gb = independent_coupling(std::vector<Measure>{b});
  const Coupling p = product(ga, gb);
  CHECK(p.total_mass() == doctest::Approx(1.0));
  for (const auto& e : p.entries())
    CHECK(e.mass == doctest::Approx(a.weight(e.tuple[0]) * b.weight(e.tuple[1])));
  CHECK(marginal(p, 0) == a);
  CHECK(max_abs_deviation(marginal(p, 1), b) < 1e-15);
  CHECK_THROWS_AS(marginal(p, 2), std::out_of_range);

  const Coupling dirac({a, b, a}, {{{2, 1, 0}, 1.0}});
  for (Index k = 0; k < 3; ++k) CHECK(marginal(dirac, k).is_dirac());

  std::mt19937_64 rng(11);
  const Coupling g2 = random_coupling(rng, {a, b});
  const Coupling g3 = random_coupling(rng, {b, a, a});
  const Coupling big = product(g2, g3);
  CHECK(is_feasible(big));
  CHECK(max_abs_deviation(marginal(big, 0), marginal(g2, 0)) < 1e-15);
  CHECK(max_abs_deviation(marginal(big, 4), marginal(g3, 2)) < 1e-15);
}

TEST_CASE("symmetrize") {
  const Measure m = line_measure({0, 1}, {0.5, 0.5});
  const Measure n = line_measure({5, 7}, {0.5, 0.5});
  const Coupling point({m, n}, {{{0, 1}, 1.0}});
  const Coupling sym = symmetrize(point);
  REQUIRE(sym.entries().size() == 2);
  const auto& ax = sym.axis(0);
  const auto a = *ax.find(vec({0})), b = *ax.find(vec({7}));
  for (const auto& e : sym.entries()) {
    CHECK(e.mass == doctest::Approx(0.5));
    CHECK(((e.tuple == IndexTuple{a, b}) || (e.tuple == IndexTuple{b, a})));
  }
  CHECK(symmetrize(sym).entries().size() == sym.entries().size());
  for (std::size_t i = 0; i < sym.entries().size(); ++i)
    CHECK(symmetrize(sym).entries()[i].mass == doctest::Approx(sym.entries()[i].mass));

  std::mt19937_64 rng(5);
  std::vector<Measure> ms{oracle::random_measure(rng, 2, 3), oracle::random_measure(rng, 2, 2),
                          oracle::random_measure(rng, 2, 4)};
  const Coupling s3 = symmetrize(random_coupling(rng, ms));
  const Measure first = marginal(s3, 0);
  for (Index k = 1; k < 3; ++k) CHECK(max_abs_deviation(marginal(s3, k), first) < 1e-15);

  std::vector<Measure> seven(7, m);
  CHECK_THROWS_AS(symmetrize(independent_coupling(seven)), std::invalid_argument);
}

TEST_CASE("symmetrized translated product has marginal rho_eta") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 1 + trial % 2;
    const Measure ra = oracle::random_measure(rng, d, 3);
    const Measure rb = oracle::random_measure(rng, d, 2);
    const double eta = 0.2 + 0.1 * trial;
    const Vector r = molecule_offset<double>(d, eta);
    const Coupling ga = random_coupling(rng, {ra, ra});
    const Coupling gb = random_coupling(rng, {rb, rb, rb});
    const Coupling g = symmetrize(product(translate(ga, r), translate(gb, Vector(-r))));
    const Measure target = mixture_rho_eta(ra, rb, 2, 3, eta);
    for (Index k = 0; k < g.order(); ++k) CHECK(max_abs_deviation(marginal(g, k), target) <= 1e-12);
  }
}

TEST_CASE("northwest corner is a feasible vertex") {
  const Measure a = line_measure({0, 1, 2}, {0.2, 0.5, 0.3});
  const Measure b = line_measure({0, 1}, {0.6, 0.4});
  const Coupling g = northwest_corner<double>({a, b, a}, {{0, 1, 2}, {0, 1}, {2, 1, 0}});
  CHECK(is_feasible(g));
  CHECK(static_cast<Index>(g.entries().size()) <= 3 + 2 + 3 - 3 + 1);
}
