#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qel/balancing.hpp"
#include "qel/polytope.hpp"
#include "qel/potential.hpp"
#include "qel/quantisation.hpp"
#include "qel/rational.hpp"

namespace qel {

// ---- torus actions on the section spaces ----

// Trace-free weight diagonal of the one-parameter subgroup with moment
// direction lambda acting on the level-k sections: w(alpha) = <lambda, alpha>
// minus the mean over the lattice points of kP.
struct LevelGenerator {
  std::vector<Rational> weights;  // centred, in lattice-point order
  Rational mean;                  // the subtracted mean
  long N = 0;
};

LevelGenerator generator_at_level(const DelzantPolytope& P,
                                  const std::vector<Rational>& lambda, long k);

Eigen::VectorXd generator_diagonal(const LevelGenerator& g);

// ---- dimension / weight expansions ----

// Exact polynomial data
//   N(k)    = a0 k^n     + a1 k^{n-1} + ... + a_n
//   tr(A_k) = b0 k^{n+1} + b1 k^n     + ... + b_{n+1}
// for the un-centred weights w(alpha) = <lambda, alpha>.  Both sequences are
// genuinely polynomial for lattice Delzant data, so the fits are exact and
// every sample beyond the minimal count is cross-checked exactly.  The
// per-level centring shifts tr(A_k)/N(k) are recorded alongside; the Chow
// weight and the Donaldson-Futaki invariant are invariant under the affine
// reweightings w -> w + k c, so either convention gives the same values.
struct ExpansionFit {
  int n = 0;
  std::vector<Rational> lambda;
  RationalPoly n_poly;                // N(k), ascending coefficients
  RationalPoly trace_poly;            // tr(A_k), un-centred, ascending
  std::vector<long> k_list;
  std::vector<Rational> level_means;  // tr(A_k)/N(k) over k_list

  Rational a(int i) const;  // a_i = coefficient of k^{n-i}
  Rational b(int i) const;  // b_i = coefficient of k^{n+1-i}
};

// requires |k_list| >= n+3 distinct positive levels
ExpansionFit fit_expansions(const DelzantPolytope& P,
                            const std::vector<Rational>& lambda,
                            const std::vector<long>& k_list);

// Chow_r = r b0 - a0 tr(A_r) / N(r), exact
Rational chow_weight(const ExpansionFit& fit, long r);

// DF = (a1 b0 - a0 b1) / a0, the k -> infinity limit of Chow_k
Rational df_invariant(const ExpansionFit& fit);

// ---- inner product of torus actions ----

// Exact leading coefficient of the degree-(n+2) polynomial tr(A_k B_k) for
// the centred generators of lambda1 and lambda2, extracted as p0 - q0 r0 / a0
// from the exact fits of sum w1 w2 (p), sum w1 (q), sum w2 (r) and N.
Rational inner_product(const DelzantPolytope& P,
                       const std::vector<Rational>& lambda1,
                       const std::vector<Rational>& lambda2,
                       const std::vector<long>& k_list);

// the same number from closed-form moments:
//   int l1 l2 dx - (int l1 dx)(int l2 dx)/V   with  l_i = <lambda_i, x>
Rational covariance_pairing(const DelzantPolytope& P,
                            const std::vector<Rational>& lambda1,
                            const std::vector<Rational>& lambda2);

struct InnerProductTable {
  std::vector<std::vector<Rational>> directions;
  std::vector<long> k_list;
  std::vector<std::vector<Rational>> pairing;  // symmetric
};

InnerProductTable inner_product_table(
    const DelzantPolytope& P,
    const std::vector<std::vector<Rational>>& directions,
    const std::vector<long>& k_list);

// ---- extremal direction ----

// L^2(P)-projection of the scalar curvature onto affine functions of the
// moment map, computed exactly from the integration-by-parts identity
// int S f dmu = 2 pi int_dP f dsigma for affine f.  s_hat stores the affine
// coefficients (c, l_1, ..., l_n) of S/pi; chi = -l/4 is the torus direction
// with DF(beta) = <beta, chi> for every beta, normalised so that
// DF(chi) = <chi, chi>; chi_shift = -c/4 is its Hamiltonian constant.
struct ExtremalData {
  std::vector<Rational> s_hat;
  std::vector<Rational> chi;
  Rational chi_shift;
  Rational df_chi;      // <chi, chi> = DF(chi)
  bool cscK = false;    // chi == 0: relative DF reduces to DF
};

ExtremalData extremal_normalisation(const DelzantPolytope& P);

// DF relative to the extremal direction: DF(alpha) - <alpha, chi>
Rational relative_df(const DelzantPolytope& P,
                     const std::vector<Rational>& alpha,
                     const ExtremalData& ex, const std::vector<long>& k_list);

// DF relative to a pairwise orthogonal torus basis:
//   DF(alpha) - sum_i (<alpha, beta_i> / <beta_i, beta_i>) DF(beta_i)
// Throws ConfigError on a degenerate (<beta,beta> = 0) or non-orthogonal
// basis.
Rational relative_df_basis(const DelzantPolytope& P,
                           const std::vector<Rational>& alpha,
                           const std::vector<std::vector<Rational>>& basis,
                           const std::vector<long>& k_list);

// ---- equivariant Riemann-Roch density ----

// Both sides of the equivariant density identity for the product action with
// Hamiltonian psi = <lambda, x> + c0, whose level-k generator has the weight
// diagonal -2 pi (<lambda, alpha> + k c0):
//   lhs = (V/kN) tr(generator / 2 pi)                  exact lattice sum
//   rhs = -int psi rho_bar dmu - (1/4 pi k) int (d psi, d rho_bar) dmu
// together with the two pointwise densities whose equality underlies it:
//   gram:   sum_a (<lambda,alpha> + k c0) exp(logD_a - hilb_a)
//   closed: k psi rho_bar + (1/2) <lambda, grad_xi rho_bar>
// rho_bar is the Bergman function of the model metric (eta = hilb).
struct EquivariantDensity {
  double lhs = 0;
  double rhs = 0;
  Eigen::VectorXd gram_density;
  Eigen::VectorXd closed_density;
  bool normalisation_ok = false;  // |lhs - rhs| within quadrature slack
};

EquivariantDensity equivariant_density(const Quantisation& q,
                                       const std::vector<double>& lambda,
                                       double c0);

// (1/4 pi) int <lambda, x> (S - S_bar) dmu: the differential-geometric form
// of the Futaki invariant.  Independent of the model metric on the polytope;
// equals the Donaldson-Futaki invariant of the action with weights
// -<lambda, alpha> (the 1/2 pi rescaling of the pushed-forward generator).
double futaki_integral(const SymplecticPotential& pot,
                       const std::vector<double>& lambda, int order);

// ---- limit of the twisted balanced weights ----

// fits a + b/k + c/k^2 through the last three samples and returns a
double richardson_limit(const std::vector<long>& ks,
                        const std::vector<double>& values);

struct LimitWeightCheck {
  std::vector<long> ks;
  std::vector<double> terms;  // (V/N) tr(B_k M_k^{-1}) per level
  double extrapolated = 0;
  double target = 0;          // <beta, chi>
};

// Evaluates the limit-weight sequence of the centred beta-generator against
// the twist matrices of converged self-consistent runs, extrapolates it, and
// attaches the predicted limit <beta, chi>.  Refuses non-converged reports.
LimitWeightCheck limit_weight_check(
    const DelzantPolytope& P, const std::vector<long>& ks,
    const std::vector<const SelfConsistentReport*>& reports,
    const std::vector<Rational>& beta, const ExtremalData& ex);

}  // namespace qel
