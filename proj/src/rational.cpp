#include "qel/rational.hpp"

namespace qel {

Rational RationalPoly::eval(const Rational& t) const {
  Rational acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
  return acc;
}

int RationalPoly::degree() const {
  for (int i = static_cast<int>(coeffs.size()) - 1; i >= 0; --i)
    if (coeffs[i] != 0) return i;
  return -1;
}

Rational RationalPoly::leading() const {
  int d = degree();
  return d < 0 ? Rational(0) : coeffs[d];
}

Rational RationalPoly::coeff_of_power(int p) const {
  if (p < 0 || p >= static_cast<int>(coeffs.size())) return 0;
  return coeffs[p];
}

std::vector<Rational> solve_rational(std::vector<std::vector<Rational>> a,
                                     std::vector<Rational> b) {
  const size_t n = a.size();
  if (b.size() != n) throw InvariantError("solve_rational: shape mismatch");
  for (auto& row : a)
    if (row.size() != n) throw InvariantError("solve_rational: non-square matrix");

  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) throw InvariantError("solve_rational: singular matrix");
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0) continue;
      Rational f = a[r][col] / a[col][col];
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Rational> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

RationalPoly fit_polynomial_exact(const std::vector<long>& ks,
                                  const std::vector<Rational>& values,
                                  int degree) {
  if (degree < 0) throw InvariantError("fit_polynomial_exact: negative degree");
  const size_t m = static_cast<size_t>(degree) + 1;
  if (ks.size() != values.size())
    throw InvariantError("fit_polynomial_exact: shape mismatch");
  if (ks.size() < m)
    throw InvariantError("fit_polynomial_exact: not enough samples");

  // solve on the first m samples, then check the rest exactly
  std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m));
  std::vector<Rational> b(m);
  for (size_t i = 0; i < m; ++i) {
    Rational p = 1;
    for (size_t j = 0; j < m; ++j) {
      a[i][j] = p;
      p *= ks[i];
    }
    b[i] = values[i];
  }
  RationalPoly poly{solve_rational(std::move(a), std::move(b))};
  for (size_t i = 0; i < ks.size(); ++i) {
    if (poly.eval(ks[i]) != values[i])
      throw InvariantError(
          "fit_polynomial_exact: data is not polynomial of degree " +
          std::to_string(degree));
  }
  return poly;
}

BigInt binomial(long n, long r) {
  if (r < 0 || r > n) return 0;
  if (r > n - r) r = n - r;
  BigInt acc = 1;
  for (long i = 1; i <= r; ++i) {
    acc *= (n - r + i);
    acc /= i;
  }
  return acc;
}

}  // namespace qel
