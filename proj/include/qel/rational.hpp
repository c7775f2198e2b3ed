#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <vector>

#include "qel/common.hpp"

namespace qel {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// dense polynomial with exact rational coefficients, coeffs[i] * t^i
struct RationalPoly {
  std::vector<Rational> coeffs;

  Rational eval(const Rational& t) const;
  int degree() const;                       // -1 for the zero polynomial
  Rational leading() const;                 // 0 for the zero polynomial
  Rational coeff_of_power(int p) const;     // 0 beyond stored range
};

// Solves a*x = b by exact Gaussian elimination; throws InvariantError on a
// singular matrix.
std::vector<Rational> solve_rational(std::vector<std::vector<Rational>> a,
                                     std::vector<Rational> b);

// Interpolates values sampled at integer arguments ks by a polynomial of the
// given degree.  Requires strictly more samples than degree + 1 would need
// only if available; every extra sample is checked against the fit and a
// nonzero residual throws InvariantError (the data was not polynomial of the
// claimed degree).
RationalPoly fit_polynomial_exact(const std::vector<long>& ks,
                                  const std::vector<Rational>& values,
                                  int degree);

BigInt binomial(long n, long r);

}  // namespace qel
