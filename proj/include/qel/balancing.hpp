#pragma once

#include <string>
#include <vector>

#include "qel/quantisation.hpp"

namespace qel {

// ---- the twist matrix M = (1 + C_A) Id + A / (2 pi k) ----

// C_A is the unique constant with sum_a 1/M_a = N on the branch where every
// M_a is positive; safeguarded Newton with a bisection fallback.
double solve_ca(const Eigen::VectorXd& A_diag, long k);

Eigen::VectorXd m_values(const Eigen::VectorXd& A_diag, long k, double ca);

// ---- energy functional ----
//
// Z(H) = I(H) + (k^n V / N) sum_a eta_a / M_a for diagonal H = diag(exp(eta)),
// where I is the Aubin-Mabuchi difference of the FS potential of H and the
// basepoint potential, normalised so that Z(cH) = Z(H).  Minimisers are the
// relatively balanced forms: mu_hat = M^{-1}.
struct EnergyBreakdown {
  double total = 0;
  double i_part = 0;
  double trace_part = 0;
};

EnergyBreakdown energy_terms(const Quantisation& q, const CentreData& c,
                             const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& A_diag, double ca);
EnergyBreakdown energy_diag(const Quantisation& q, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& A_diag);

// same energy for a full (possibly non-diagonal) H; dim 1 only
EnergyBreakdown energy_full(const Quantisation& q, const Eigen::MatrixXcd& H,
                            const Eigen::VectorXd& A_diag);

// gradient of Z in the diagonal coordinates eta:
//   dZ/deta_a = (k^n V / N) (1/M_a - mu_hat_a)
Eigen::VectorXd energy_gradient(const Quantisation& q, const CentreData& c,
                                const Eigen::VectorXd& A_diag, double ca);

// ---- solvers ----

struct BalanceOptions {
  double tolerance = 1e-10;     // sup-norm of mu_hat - M^{-1}
  long max_iter = 2000;
  std::string start = "hilb";   // hilb | identity | random
  unsigned long long seed = 0;  // for start = random
  std::string solver = "gradient";  // gradient | fixed-point
  double outer_tolerance = 1e-8;    // twist-update stall, self-consistent mode
};

struct BalanceReport {
  Eigen::VectorXd eta;       // converged diagonal, mean-zero gauge
  Eigen::VectorXd A_diag;
  double ca = 0;
  Eigen::VectorXd mu_hat;
  double residual = 0;       // sup-norm of mu_hat - M^{-1}
  double rel_residual = 0;   // Frobenius, relative to |mu_hat|
  EnergyBreakdown energy;
  long iterations = 0;
  bool converged = false;
  std::vector<double> energy_path;  // gradient solver: Z after each step
};

BalanceReport balance(const Quantisation& q, const Eigen::VectorXd& A_diag,
                      const BalanceOptions& opts);

// ---- generator fitting (self-consistent twist) ----

// least-squares fit of y_a against c + <lambda, alpha_a> over the sections
struct AffineFit {
  double c = 0;
  Eigen::VectorXd lambda;
  double remainder = 0;  // sup-norm of the fit residual
};
AffineFit fit_affine_in_alpha(const std::vector<std::vector<long>>& alphas,
                              const Eigen::VectorXd& y);

// lambda* minimising the Dirichlet gap between the Bergman function of FS(H)
// and the moment-affine functions <lambda, x>, in the FS metric:
//   Gram_{jl} = 2 pi int ((2/k) C)_{jl} dvol_FS,
//   rhs_j     = 2 pi int (grad_xi rho_bar_FS)_j dvol_FS.
// remainder is the relative Dirichlet gap sqrt(1 - <rhs, lambda> / D).
struct MomentFit {
  Eigen::VectorXd lambda;
  double remainder = 0;
};
MomentFit fit_moment_affine(const Quantisation& q, const CentreData& c);

struct SelfConsistentReport {
  BalanceReport final_state;
  Eigen::VectorXd lambda_star;   // fitted generator, moment coordinates
  double fit_remainder = 0;
  long outer_iterations = 0;
  bool converged = false;
  std::vector<double> a_update_path;  // sup-norm of A-updates per outer step
};

SelfConsistentReport self_consistent_balance(const Quantisation& q,
                                             const BalanceOptions& opts);

// ---- weak relative Chow polystability certificate ----

// continued-fraction rationalisation of a fitted direction; zero vector when
// every component rounds to zero
std::vector<long> rationalize_direction(const Eigen::VectorXd& lambda,
                                        long max_denominator);

struct ChowCertificate {
  double c = 0;                     // affine fit of 1/mu_hat
  Eigen::VectorXd lambda;
  double fit_remainder = 0;
  std::vector<long> direction;      // primitive grouping direction (may be 0)
  std::vector<double> block_keys;   // distinct <direction, alpha>, ascending
  std::vector<double> b;            // positive constant per block
  double block_spread = 0;          // worst in-block deviation of mu_hat
  double partition_residual = 0;    // sup_x |sum_a b_a p_a / mu_hat_a - 1|
  bool polystable = false;
  std::string reason;               // empty when polystable
};

struct CertificateOptions {
  const std::vector<long>* direction_override = nullptr;
  double spread_tolerance = 1e-8;
  double partition_tolerance = 1e-8;
  double fit_tolerance = 1e-6;
  long max_denominator = 64;
};

ChowCertificate chow_certificate(const Quantisation& q, const CentreData& c,
                                 const CertificateOptions& copts);

// contribution (V/N) sum_a B_a / M_a of a centred test generator to the
// limit weight at one level
double limit_weight_term(const Eigen::VectorXd& B_centred,
                         const Eigen::VectorXd& m_vals, double V, long N);

}  // namespace qel
