#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "qel/polytope.hpp"
#include "qel/quadrature.hpp"

namespace qel {

// Polynomial added to the Guillemin potential: sum of coeff * x^e terms.
struct PolynomialPerturbation {
  // exponent vector (length = dim) -> coefficient
  std::map<std::vector<int>, double> terms;

  bool empty() const { return terms.empty(); }
  double value(const std::vector<double>& x) const;
  // derivative of order |d| given by the per-coordinate counts d
  double derivative(const std::vector<int>& d, const std::vector<double>& x) const;
};

// Symplectic potential u = u_guillemin + perturbation on the interior of P,
// with u_guillemin = (1/2) sum_i ell_i log ell_i.  Provides the derivatives
// needed for the metric, its curvature, and the Legendre transform to
// logarithmic coordinates xi = grad u.  Holds its own copy of the polytope.
class SymplecticPotential {
 public:
  explicit SymplecticPotential(DelzantPolytope P,
                               PolynomialPerturbation pert = {});

  const DelzantPolytope& polytope() const { return P_; }
  int dim() const { return P_.dim(); }
  bool perturbed() const { return !pert_.empty(); }

  double value(const std::vector<double>& x) const;
  Eigen::VectorXd gradient(const std::vector<double>& x) const;
  Eigen::MatrixXd hessian(const std::vector<double>& x) const;         // W
  Eigen::MatrixXd hessian_inverse(const std::vector<double>& x) const; // U = W^{-1}
  double third_derivative(int a, int b, int c, const std::vector<double>& x) const;
  double fourth_derivative(int a, int b, int c, int d,
                           const std::vector<double>& x) const;

  // scalar curvature of the associated Kaehler metric:
  //   S(x) = -pi * sum_{jk} d^2 (W^{-1})_{jk} / dx_j dx_k
  // For the unperturbed segment [0,1] this is 4*pi; for the unit square 8*pi.
  double scalar_curvature(const std::vector<double>& x) const;

  // average of S against Lebesgue measure on P: 4*pi*a1/a0 with a0 = vol(P)
  // and a1 = (1/2) * sigma-perimeter (exact boundary-measure identity)
  double mean_scalar_curvature() const;

  // Kaehler-potential side: phi(xi) = <x,xi> - u(x) at x = moment_from_log(xi)
  std::vector<double> moment_from_log(const std::vector<double>& xi) const;
  double kahler_value(const std::vector<double>& xi) const;

  // verifies positive-definiteness of Hess u at every quadrature node;
  // throws ConfigError naming the failing node otherwise
  void check_convex(const QuadratureRule& rule) const;

 private:
  DelzantPolytope P_;
  PolynomialPerturbation pert_;
};

}  // namespace qel
