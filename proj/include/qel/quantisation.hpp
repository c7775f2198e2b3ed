#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qel/potential.hpp"
#include "qel/quadrature.hpp"

namespace qel {

// Level-k section data of a torus-invariant model metric, cached at interior
// quadrature nodes.
//
// Conventions (fixed throughout the project):
//   * the Kaehler form satisfies vol(X) = vol(P) = V and the moment map
//     pushes omega^n/n! to Lebesgue measure on P;
//   * sections are the monomials indexed by alpha in kP cap Z^n, with
//     log h^k-density  log D_alpha(x) = 2<alpha - kx, grad u(x)> + 2k u(x);
//   * Hilb(h) = (N/V) * (L^2 Gram of the monomials), diagonal here;
//   * rho_bar = (V/N) rho_k, so that integral of rho_bar over P equals V.
struct Quantisation {
  const SymplecticPotential* pot = nullptr;
  long k = 0;
  int n = 0;
  long N = 0;
  double V = 0.0;
  std::vector<std::vector<long>> alphas;
  QuadratureRule rule;

  // per-node caches for the model metric
  std::vector<Eigen::VectorXd> xi;    // grad u at the node
  std::vector<Eigen::MatrixXd> W;     // Hess u
  std::vector<Eigen::MatrixXd> U;     // (Hess u)^{-1} = Hessian of phi in xi
  Eigen::VectorXd detU;
  Eigen::VectorXd phi_model;          // <x, xi> - u(x)
  Eigen::MatrixXd logD;               // node x section

  // Guillemin basepoint data at the same nodes (equal to the model columns
  // when the model is unperturbed): used by the energy functional
  std::vector<Eigen::MatrixXd> Phi_base;  // Hessian of the basepoint phi in xi
  Eigen::VectorXd phi_base;

  double node_weight(size_t i) const { return rule.weights[i]; }
  size_t nodes() const { return rule.weights.size(); }
};

Quantisation make_quantisation(const SymplecticPotential& pot, long k,
                               int order);

// eta with Hilb(model) = diag(exp(eta)), computed by log-sum-exp over nodes
Eigen::VectorXd hilb_log(const Quantisation& q);

struct BergmanSample {
  Eigen::VectorXd rho_bar;   // (V/N) rho_k at the nodes
  Eigen::MatrixXd grad_xi;   // node x dim: gradient of rho_bar in xi coords
  Eigen::MatrixXd grad_x;    // node x dim: gradient in moment coords
  double integral_rho = 0;   // quadrature of rho_k over P (dimension = N)
};

// Bergman sample of the model against an arbitrary positive diagonal form
// H = diag(exp(eta)); with eta = hilb_log(q) this is the Bergman function of
// the model metric itself.
BergmanSample bergman(const Quantisation& q, const Eigen::VectorXd& eta);

// Centre-of-mass data of FS(H) for diagonal H = diag(exp(eta)).  mu_hat is
// the trace-N normalised copy; the un-normalised centre of mass of the
// H-orthonormal basis is (k^n V / N) * mu_hat and has trace k^n V.
struct CentreData {
  Eigen::VectorXd mu_hat;           // length N, positive
  Eigen::MatrixXd p;                // node x N: |s_a|^2 / K at the node
  Eigen::VectorXd logK;             // log K-tilde(x_i) = 2k(phi_H - phi_model)
  Eigen::MatrixXd m1;               // node x dim: sum_a p_a alpha
  std::vector<Eigen::MatrixXd> C;   // weight covariance at each node
  Eigen::VectorXd J;                // omega_H^n / omega_model^n at nodes
};

CentreData centre_of_mass(const Quantisation& q, const Eigen::VectorXd& eta);

// Bergman function of FS(H) sampled at the model nodes, derived from centre
// data: rho_bar_FS = sum_a p_a / mu_hat_a.
struct FsBergman {
  Eigen::VectorXd rho_bar;
  Eigen::MatrixXd grad_xi;   // gradient in xi coordinates
};
FsBergman fs_bergman(const Quantisation& q, const CentreData& c);

// sup-norm residual of the Rawnsley identity h^k_FS(Hilb(h)) * rho_bar = h^k
double rawnsley_residual(const Quantisation& q);

// ---- full-matrix path (dim 1 only): H need not be diagonal ----

// validates Hermitian positive-definiteness; throws NumericalError on failure
void check_hermitian_positive(const Eigen::MatrixXcd& H);

// trace-N normalised centre of mass of FS(H) over x-nodes times a uniform
// angular grid of 4k+8 points
Eigen::MatrixXcd centre_of_mass_full(const Quantisation& q,
                                     const Eigen::MatrixXcd& H);

// Donaldson iteration step Hilb(FS(H)) = H^{1/2} mu_hat H^{1/2}
Eigen::MatrixXcd t_operator_full(const Quantisation& q,
                                 const Eigen::MatrixXcd& H);
Eigen::VectorXd t_operator(const Quantisation& q, const Eigen::VectorXd& eta);

}  // namespace qel
