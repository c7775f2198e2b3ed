#include <vector>

#include "doctest.h"
#include "qel/polytope.hpp"

using qel::ConfigError;
using qel::DelzantPolytope;
using qel::Rational;

namespace {

DelzantPolytope segment01() {
  return DelzantPolytope::from_facets(1, {{1}, {-1}}, {Rational(0), Rational(1)});
}

DelzantPolytope unit_square() {
  return DelzantPolytope::from_facets(
      2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}},
      {Rational(0), Rational(0), Rational(1), Rational(1)});
}

// blow-up of the projective plane: x >= 0, y >= 0, y <= 1, x + y <= 2
DelzantPolytope hirzebruch() {
  return DelzantPolytope::from_facets(
      2, {{1, 0}, {0, 1}, {0, -1}, {-1, -1}},
      {Rational(0), Rational(0), Rational(1), Rational(2)});
}

}  // namespace

TEST_CASE("rational polynomial fitting recovers exact coefficients") {
  // samples of 3/2 k^2 + 5/2 k + 1
  std::vector<long> ks = {1, 2, 3, 4};
  std::vector<Rational> vals;
  for (long k : ks) vals.push_back(Rational(3 * k * k, 2) + Rational(5 * k, 2) + 1);
  auto p = qel::fit_polynomial_exact(ks, vals, 2);
  CHECK(p.coeff_of_power(2) == Rational(3, 2));
  CHECK(p.coeff_of_power(1) == Rational(5, 2));
  CHECK(p.coeff_of_power(0) == 1);
  CHECK(p.degree() == 2);

  // k^3 is not a quadratic: the consistency check must fire
  std::vector<Rational> cubes;
  for (long k : ks) cubes.push_back(Rational(k * k * k));
  CHECK_THROWS_AS(qel::fit_polynomial_exact(ks, cubes, 2), qel::InvariantError);
}

TEST_CASE("exact linear solve") {
  std::vector<std::vector<Rational>> a = {{Rational(2), Rational(1)},
                                          {Rational(1), Rational(3)}};
  std::vector<Rational> b = {Rational(5), Rational(10)};
  auto x = qel::solve_rational(a, b);
  CHECK(x[0] == 1);
  CHECK(x[1] == 3);

  std::vector<std::vector<Rational>> sing = {{Rational(1), Rational(2)},
                                             {Rational(2), Rational(4)}};
  CHECK_THROWS_AS(qel::solve_rational(sing, b), qel::InvariantError);
}

TEST_CASE("binomial coefficients") {
  CHECK(qel::binomial(5, 2) == 10);
  CHECK(qel::binomial(10, 0) == 1);
  CHECK(qel::binomial(10, 10) == 1);
  CHECK(qel::binomial(3, 5) == 0);
  CHECK(qel::binomial(60, 30) == qel::BigInt("118264581564861424"));
}

TEST_CASE("segment geometry") {
  auto P = segment01();
  CHECK(P.dim() == 1);
  REQUIRE(P.vertices().size() == 2);
  CHECK(P.vertices()[0][0] == 0);
  CHECK(P.vertices()[1][0] == 1);
  CHECK(P.volume() == 1);
  CHECK(P.moment({1}) == Rational(1, 2));
  CHECK(P.moment({2}) == Rational(1, 3));
  CHECK(P.boundary_moment({0}) == 2);
  CHECK(P.boundary_moment({1}) == 1);

  auto pts = P.lattice_points(3);
  REQUIRE(pts.size() == 4);
  for (long j = 0; j <= 3; ++j) CHECK(pts[j][0] == j);
}

TEST_CASE("unit square geometry") {
  auto P = unit_square();
  CHECK(P.volume() == 1);
  CHECK(P.moment({1, 0}) == Rational(1, 2));
  CHECK(P.moment({0, 1}) == Rational(1, 2));
  CHECK(P.moment({2, 0}) == Rational(1, 3));
  CHECK(P.moment({1, 1}) == Rational(1, 4));
  CHECK(P.boundary_moment({0, 0}) == 4);
  CHECK(P.boundary_moment({1, 0}) == 2);

  auto pts = P.lattice_points(2);
  REQUIRE(pts.size() == 9);
  CHECK(pts[0] == std::vector<long>({0, 0}));
  CHECK(pts[1] == std::vector<long>({0, 1}));
  CHECK(pts[8] == std::vector<long>({2, 2}));
}

TEST_CASE("hirzebruch surface geometry") {
  auto P = hirzebruch();
  REQUIRE(P.vertices().size() == 4);
  CHECK(P.volume() == Rational(3, 2));
  CHECK(P.moment({1, 0}) == Rational(7, 6));
  CHECK(P.moment({0, 1}) == Rational(2, 3));
  CHECK(P.moment({2, 0}) == Rational(5, 4));
  CHECK(P.moment({1, 1}) == Rational(11, 24));
  CHECK(P.moment({0, 2}) == Rational(5, 12));
  CHECK(P.boundary_moment({0, 0}) == 5);
  CHECK(P.boundary_moment({1, 0}) == 4);
  CHECK(P.boundary_moment({0, 1}) == 2);

  auto pts = P.lattice_points(1);
  REQUIRE(pts.size() == 5);
  CHECK(pts[0] == std::vector<long>({0, 0}));
  CHECK(pts[1] == std::vector<long>({0, 1}));
  CHECK(pts[2] == std::vector<long>({1, 0}));
  CHECK(pts[3] == std::vector<long>({1, 1}));
  CHECK(pts[4] == std::vector<long>({2, 0}));

  // lattice counts follow a quadratic in k with known coefficients
  std::vector<long> ks = {1, 2, 3, 4, 5};
  std::vector<Rational> counts;
  for (long k : ks) counts.push_back(static_cast<long>(P.lattice_points(k).size()));
  auto ehr = qel::fit_polynomial_exact(ks, counts, 2);
  CHECK(ehr.coeff_of_power(2) == P.volume());
  CHECK(ehr.coeff_of_power(1) == P.boundary_moment({0, 0}) / 2);
  CHECK(ehr.coeff_of_power(0) == 1);
}

TEST_CASE("validation rejects malformed polytopes") {
  // non-primitive normal
  CHECK_THROWS_AS(DelzantPolytope::from_facets(1, {{2}, {-1}},
                                               {Rational(0), Rational(1)}),
                  ConfigError);
  // unbounded region
  CHECK_THROWS_AS(DelzantPolytope::from_facets(2, {{1, 0}, {0, 1}},
                                               {Rational(0), Rational(0)}),
                  ConfigError);
  // tangent facet destroys simplicity
  CHECK_THROWS_AS(
      DelzantPolytope::from_facets(
          2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}},
          {Rational(0), Rational(0), Rational(1), Rational(1), Rational(0)}),
      ConfigError);
  // redundant facet never touches the region
  CHECK_THROWS_AS(
      DelzantPolytope::from_facets(
          2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}},
          {Rational(0), Rational(0), Rational(1), Rational(1), Rational(5)}),
      ConfigError);
  // normals at the vertex (0,1) have determinant -2: not a lattice basis
  CHECK_THROWS_AS(DelzantPolytope::from_facets(
                      2, {{1, 0}, {0, 1}, {-1, -2}},
                      {Rational(0), Rational(0), Rational(2)}),
                  ConfigError);
  // fractional vertex
  CHECK_THROWS_AS(DelzantPolytope::from_facets(1, {{1}, {-1}},
                                               {Rational(0), Rational(1, 2)}),
                  ConfigError);
}
