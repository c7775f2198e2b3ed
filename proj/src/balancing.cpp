#include "qel/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qel/common.hpp"

namespace qel {

namespace {

constexpr double kPi = 3.14159265358979323846;

double pow_n(long k, int n) {
  double v = 1;
  for (int i = 0; i < n; ++i) v *= static_cast<double>(k);
  return v;
}

// ratio of the mixed wedge omega_fs^a omega_base^(n-a) / n! to the model
// volume form at one node; fs and base are the xi-Hessians of the respective
// potentials.
double mixed_ratio(int n, int a, const Eigen::MatrixXd& fs,
                   const Eigen::MatrixXd& base, double detU) {
  if (n == 1) {
    double v = (a == 0) ? base(0, 0) : fs(0, 0);
    return v / detU;
  }
  double v = 0;
  if (a == 0)
    v = base.determinant();
  else if (a == 2)
    v = fs.determinant();
  else
    v = 0.5 * (fs(0, 0) * base(1, 1) + fs(1, 1) * base(0, 0) -
               fs(0, 1) * base(1, 0) - fs(1, 0) * base(0, 1));
  return v / detU;
}

long long rational_gcd(long long a, long long b) {
  a = std::llabs(a);
  b = std::llabs(b);
  while (b) {
    long long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::pair<long long, long long> rationalize(double x, long max_den) {
  // best continued-fraction convergent with denominator <= max_den
  long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(v);
    long long a = static_cast<long long>(fl);
    long long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    double frac = v - fl;
    if (frac < 1e-12) break;
    v = 1.0 / frac;
  }
  return {p1, q1};
}

Eigen::VectorXd start_eta(const Quantisation& q, const BalanceOptions& opts) {
  if (opts.start == "hilb") return hilb_log(q);
  if (opts.start == "identity") return Eigen::VectorXd::Zero(q.N);
  if (opts.start == "random") {
    std::mt19937_64 gen(opts.seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    Eigen::VectorXd eta(q.N);
    for (long a = 0; a < q.N; ++a) eta(a) = dist(gen);
    return eta;
  }
  throw ConfigError("unknown start '" + opts.start +
                    "' (expected hilb, identity or random)");
}

void gauge(Eigen::VectorXd& eta) { eta.array() -= eta.mean(); }

double sup_residual(const Eigen::VectorXd& mu_hat,
                    const Eigen::VectorXd& m_vals) {
  return (mu_hat - m_vals.cwiseInverse()).cwiseAbs().maxCoeff();
}

BalanceReport balance_from(const Quantisation& q,
                           const Eigen::VectorXd& A_diag,
                           Eigen::VectorXd eta, const BalanceOptions& opts) {
  if (A_diag.size() != q.N)
    throw InvariantError("balance: twist has wrong dimension");
  if (opts.solver != "gradient" && opts.solver != "fixed-point")
    throw ConfigError("unknown solver '" + opts.solver +
                      "' (expected gradient or fixed-point)");
  const double ca = solve_ca(A_diag, q.k);
  const Eigen::VectorXd m = m_values(A_diag, q.k, ca);
  const bool grad_mode = opts.solver == "gradient";

  BalanceReport rep;
  rep.A_diag = A_diag;
  rep.ca = ca;
  gauge(eta);

  CentreData c = centre_of_mass(q, eta);
  EnergyBreakdown e;
  if (grad_mode) e = energy_terms(q, c, eta, A_diag, ca);

  // the equation mu_hat = M^{-1} need not be solvable for an arbitrary
  // twist (the energy can be unbounded below along a destabilising ray);
  // track the best visited state so a non-converged run still reports the
  // closest approach rather than wherever the descent wandered off to
  double best_res = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_eta = eta;
  Eigen::VectorXd best_mu = c.mu_hat;

  for (long it = 0; it <= opts.max_iter; ++it) {
    rep.iterations = it;
    rep.residual = sup_residual(c.mu_hat, m);
    if (rep.residual < best_res) {
      best_res = rep.residual;
      best_eta = eta;
      best_mu = c.mu_hat;
    }
    if (rep.residual < opts.tolerance) {
      rep.converged = true;
      break;
    }
    if (it == opts.max_iter) break;

    if (grad_mode) {
      Eigen::VectorXd grad = energy_gradient(q, c, A_diag, ca);
      // the energy is invariant under a common shift of eta, so descend in
      // the mean-zero gauge slice
      grad.array() -= grad.mean();
      double g2 = grad.squaredNorm();
      double tau = 1.0;
      // near the minimum the demanded decrease falls below the rounding
      // noise of the energy; accept within that floor so the iteration can
      // keep contracting on the residual
      const double noise = 1e-13 * (std::abs(e.total) + 1.0);
      while (true) {
        Eigen::VectorXd trial = eta - tau * grad;
        gauge(trial);
        CentreData ct = centre_of_mass(q, trial);
        EnergyBreakdown et = energy_terms(q, ct, trial, A_diag, ca);
        if (et.total <= e.total - 1e-4 * tau * g2 + noise) {
          eta = std::move(trial);
          c = std::move(ct);
          e = et;
          break;
        }
        tau *= 0.5;
        if (tau < 1e-14)
          throw NumericalError("balance: line search failed at iteration " +
                               std::to_string(it));
      }
      rep.energy_path.push_back(e.total);
    } else {
      eta += (c.mu_hat.array().log() + m.array().log()).matrix();
      gauge(eta);
      c = centre_of_mass(q, eta);
    }
  }

  if (!rep.converged) {
    rep.residual = best_res;
    eta = std::move(best_eta);
    c.mu_hat = std::move(best_mu);
  }
  rep.eta = eta;
  rep.mu_hat = c.mu_hat;
  rep.rel_residual = (c.mu_hat - m.cwiseInverse()).norm() / c.mu_hat.norm();
  rep.energy = grad_mode && rep.converged
                   ? e
                   : energy_terms(q, centre_of_mass(q, eta), eta, A_diag, ca);
  return rep;
}

}  // namespace

double solve_ca(const Eigen::VectorXd& A_diag, long k) {
  const long N = A_diag.size();
  if (N == 0) throw InvariantError("solve_ca: empty twist");
  Eigen::VectorXd a = A_diag / (2.0 * kPi * static_cast<double>(k));
  if (a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  // f(C) = sum_i 1/((1+C) + a_i) - N is strictly decreasing from +inf to -N
  // on the branch (1+C) + min(a) > 0
  const double pole = -1.0 - a.minCoeff();
  auto f = [&](double c) {
    double s = 0;
    for (long i = 0; i < N; ++i) s += 1.0 / ((1.0 + c) + a(i));
    return s - static_cast<double>(N);
  };
  double off = 1e-12 * std::max(1.0, std::abs(pole));
  double lo = pole + off;
  while (!(f(lo) > 0)) {
    off *= 0.5;
    lo = pole + off;
    if (off < 1e-300) throw NumericalError("solve_ca: bracketing failed");
  }
  double hi = std::max(pole + 1.0, 1.0);
  while (f(hi) > 0) hi = pole + 2.0 * (hi - pole);
  double c = (lo < 0.0 && 0.0 < hi) ? 0.0 : 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double fc = f(c);
    if (std::abs(fc) < 1e-14 * N) break;
    if (fc > 0)
      lo = c;
    else
      hi = c;
    double df = 0;
    for (long i = 0; i < N; ++i) {
      double mi = (1.0 + c) + a(i);
      df -= 1.0 / (mi * mi);
    }
    double next = c - fc / df;
    c = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
  }
  return c;
}

Eigen::VectorXd m_values(const Eigen::VectorXd& A_diag, long k, double ca) {
  Eigen::VectorXd m =
      (A_diag / (2.0 * kPi * static_cast<double>(k))).array() + (1.0 + ca);
  if (!(m.minCoeff() > 0))
    throw NumericalError("twist matrix M lost positivity");
  return m;
}

EnergyBreakdown energy_terms(const Quantisation& q, const CentreData& c,
                             const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& A_diag, double ca) {
  EnergyBreakdown out;
  const double kn = pow_n(q.k, q.n);
  double am = 0;
  for (size_t i = 0; i < q.nodes(); ++i) {
    double p = 0.5 * c.logK(i) / static_cast<double>(q.k) + q.phi_model(i) -
               q.phi_base(i);
    Eigen::MatrixXd fs = (2.0 / static_cast<double>(q.k)) * c.C[i];
    double r = 0;
    for (int a = 0; a <= q.n; ++a)
      r += mixed_ratio(q.n, a, fs, q.Phi_base[i], q.detU(i));
    am += q.node_weight(i) * p * r;
  }
  am /= (q.n + 1);
  out.i_part = 2.0 * kn * static_cast<double>(q.k) * am;
  Eigen::VectorXd m = m_values(A_diag, q.k, ca);
  out.trace_part =
      kn * q.V / static_cast<double>(q.N) * (eta.array() / m.array()).sum();
  out.total = out.i_part + out.trace_part;
  return out;
}

EnergyBreakdown energy_diag(const Quantisation& q, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& A_diag) {
  CentreData c = centre_of_mass(q, eta);
  return energy_terms(q, c, eta, A_diag, solve_ca(A_diag, q.k));
}

EnergyBreakdown energy_full(const Quantisation& q, const Eigen::MatrixXcd& H,
                            const Eigen::VectorXd& A_diag) {
  if (q.n != 1)
    throw InvariantError("energy_full requires a one-dimensional polytope");
  check_hermitian_positive(H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  Eigen::MatrixXcd B = es.operatorInverseSqrt();
  const long M = 4 * q.k + 8;
  const double two_pi = 2.0 * kPi;

  double am = 0;
  Eigen::VectorXcd t(q.N), ct(q.N), f(q.N), g(q.N);
  for (size_t i = 0; i < q.nodes(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long a = 0; a < q.N; ++a) mx = std::max(mx, 0.5 * q.logD(i, a));
    const double x = q.rule.points[i][0];
    const double Ui = q.U[i](0, 0);
    const double base_ratio = q.Phi_base[i](0, 0) / q.detU(i);
    double acc = 0;
    for (long mm = 0; mm < M; ++mm) {
      double theta = two_pi * static_cast<double>(mm) / M;
      for (long a = 0; a < q.N; ++a) {
        double amp = std::exp(0.5 * q.logD(i, a) - mx);
        t(a) = std::polar(amp, theta * static_cast<double>(q.alphas[a][0]));
        ct(a) = (static_cast<double>(q.alphas[a][0]) - q.k * x) * t(a);
      }
      f = B.transpose() * t;
      g = B.transpose() * ct;
      double K = f.squaredNorm();
      double W2 = g.squaredNorm();
      std::complex<double> W1 = f.dot(g);
      double lap = 2.0 * (W2 / K - std::norm(W1) / (K * K));
      double fs_ratio = lap / (q.k * Ui);
      if (!(fs_ratio > 0))
        throw NumericalError("Fubini-Study metric degenerate at node " +
                             std::to_string(i));
      double logK_true = std::log(K) + 2.0 * mx;
      double p = 0.5 * logK_true / static_cast<double>(q.k) +
                 q.phi_model(i) - q.phi_base(i);
      acc += p * (base_ratio + fs_ratio);
    }
    am += q.node_weight(i) * acc / static_cast<double>(M);
  }
  am /= 2.0;

  EnergyBreakdown out;
  out.i_part = 2.0 * static_cast<double>(q.k) * static_cast<double>(q.k) * am;
  double ca = solve_ca(A_diag, q.k);
  Eigen::VectorXd m = m_values(A_diag, q.k, ca);
  Eigen::VectorXd logev = es.eigenvalues().array().log();
  Eigen::MatrixXcd logH =
      es.eigenvectors() * logev.asDiagonal() * es.eigenvectors().adjoint();
  double tr = 0;
  for (long a = 0; a < q.N; ++a) tr += logH(a, a).real() / m(a);
  out.trace_part =
      static_cast<double>(q.k) * q.V / static_cast<double>(q.N) * tr;
  out.total = out.i_part + out.trace_part;
  return out;
}

Eigen::VectorXd energy_gradient(const Quantisation& q, const CentreData& c,
                                const Eigen::VectorXd& A_diag, double ca) {
  Eigen::VectorXd m = m_values(A_diag, q.k, ca);
  double scale = pow_n(q.k, q.n) * q.V / static_cast<double>(q.N);
  return scale * (m.cwiseInverse() - c.mu_hat);
}

BalanceReport balance(const Quantisation& q, const Eigen::VectorXd& A_diag,
                      const BalanceOptions& opts) {
  return balance_from(q, A_diag, start_eta(q, opts), opts);
}

AffineFit fit_affine_in_alpha(const std::vector<std::vector<long>>& alphas,
                              const Eigen::VectorXd& y) {
  const long N = y.size();
  if (alphas.size() != static_cast<size_t>(N) || N == 0)
    throw InvariantError("fit_affine_in_alpha: shape mismatch");
  const int n = static_cast<int>(alphas[0].size());
  Eigen::MatrixXd X(N, n + 1);
  for (long i = 0; i < N; ++i) {
    X(i, 0) = 1.0;
    for (int d = 0; d < n; ++d) X(i, d + 1) = static_cast<double>(alphas[i][d]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  Eigen::VectorXd beta = cod.solve(y);
  AffineFit fit;
  fit.c = beta(0);
  fit.lambda = beta.tail(n);
  fit.remainder = (X * beta - y).cwiseAbs().maxCoeff();
  return fit;
}

MomentFit fit_moment_affine(const Quantisation& q, const CentreData& c) {
  FsBergman fs = fs_bergman(q, c);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(q.n, q.n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q.n);
  double D = 0;
  for (size_t i = 0; i < q.nodes(); ++i) {
    double w = 2.0 * kPi * q.node_weight(i) * c.J(i);
    Eigen::MatrixXd fsh = (2.0 / static_cast<double>(q.k)) * c.C[i];
    Eigen::VectorXd gr = fs.grad_xi.row(i).transpose();
    G += w * fsh;
    rhs += w * gr;
    D += w * gr.dot(fsh.inverse() * gr);
  }
  MomentFit out;
  if (D < 1e-18) {
    out.lambda = Eigen::VectorXd::Zero(q.n);
    out.remainder = 0;
    return out;
  }
  out.lambda = G.ldlt().solve(rhs);
  double gap = 1.0 - rhs.dot(out.lambda) / D;
  out.remainder = std::sqrt(std::max(0.0, gap));
  return out;
}

SelfConsistentReport self_consistent_balance(const Quantisation& q,
                                             const BalanceOptions& opts) {
  // Interleaved fixed-point search for the pair (H, A): the twist is re-fit
  // from the Bergman function of FS(H) after every descent step.  At a
  // twist-balanced state that Bergman function is exactly affine with the
  // twist's own slope, so fitting only after full inner convergence would be
  // the identity map; interleaving lets the Hilb start (whose Bergman sample
  // carries the curvature of the model) select the twist, and at the joint
  // fixed point both defining conditions hold: mu_hat = M^{-1} and A equals
  // the fitted moment-affine field of the final FS metric.
  SelfConsistentReport rep;
  Eigen::VectorXd A = Eigen::VectorXd::Zero(q.N);
  Eigen::VectorXd eta = start_eta(q, opts);
  gauge(eta);
  CentreData c = centre_of_mass(q, eta);

  for (long it = 0; it < opts.max_iter; ++it) {
    rep.outer_iterations = it + 1;
    MomentFit fit = fit_moment_affine(q, c);
    Eigen::VectorXd weights(q.N);
    for (long a = 0; a < q.N; ++a) {
      double w = 0;
      for (int d = 0; d < q.n; ++d)
        w += fit.lambda(d) * static_cast<double>(q.alphas[a][d]);
      weights(a) = w;
    }
    weights.array() -= weights.mean();
    Eigen::VectorXd A_new = 2.0 * kPi * weights;
    double update = (A_new - A).cwiseAbs().maxCoeff();
    rep.a_update_path.push_back(update);
    A = A_new;
    rep.lambda_star = fit.lambda;
    rep.fit_remainder = fit.remainder;

    double ca = solve_ca(A, q.k);
    Eigen::VectorXd m = m_values(A, q.k, ca);
    if (sup_residual(c.mu_hat, m) < opts.tolerance &&
        update < opts.outer_tolerance) {
      // polish with the final twist held fixed and report that state
      rep.final_state = balance_from(q, A, eta, opts);
      rep.converged = true;
      return rep;
    }

    EnergyBreakdown e = energy_terms(q, c, eta, A, ca);
    Eigen::VectorXd grad = energy_gradient(q, c, A, ca);
    grad.array() -= grad.mean();
    double g2 = grad.squaredNorm();
    double tau = 1.0;
    const double noise = 1e-13 * (std::abs(e.total) + 1.0);
    while (true) {
      Eigen::VectorXd trial = eta - tau * grad;
      gauge(trial);
      CentreData ct = centre_of_mass(q, trial);
      EnergyBreakdown et = energy_terms(q, ct, trial, A, ca);
      if (et.total <= e.total - 1e-4 * tau * g2 + noise) {
        eta = std::move(trial);
        c = std::move(ct);
        break;
      }
      tau *= 0.5;
      if (tau < 1e-14)
        throw NumericalError(
            "self-consistent balance: line search failed at step " +
            std::to_string(it));
    }
  }
  throw NumericalError("self-consistent balance: did not converge");
}

std::vector<long> rationalize_direction(const Eigen::VectorXd& lambda,
                                        long max_denominator) {
  const int n = static_cast<int>(lambda.size());
  std::vector<long long> num(n), den(n);
  bool all_zero = true;
  for (int d = 0; d < n; ++d) {
    if (std::abs(lambda(d)) < 1e-7) {
      num[d] = 0;
      den[d] = 1;
      continue;
    }
    all_zero = false;
    bool neg = lambda(d) < 0;
    auto pq = rationalize(std::abs(lambda(d)), max_denominator);
    num[d] = neg ? -pq.first : pq.first;
    den[d] = std::max<long long>(pq.second, 1);
  }
  std::vector<long> out(n, 0);
  if (all_zero) return out;
  long long lcm = 1;
  for (int d = 0; d < n; ++d) lcm = lcm / rational_gcd(lcm, den[d]) * den[d];
  std::vector<long long> ints(n);
  long long g = 0;
  for (int d = 0; d < n; ++d) {
    ints[d] = num[d] * (lcm / den[d]);
    g = rational_gcd(g, ints[d]);
  }
  if (g == 0) return out;
  long long lead = 0;
  for (int d = 0; d < n; ++d)
    if (ints[d] != 0) {
      lead = ints[d];
      break;
    }
  long long sign = lead > 0 ? 1 : -1;
  for (int d = 0; d < n; ++d) out[d] = static_cast<long>(ints[d] / g * sign);
  return out;
}

ChowCertificate chow_certificate(const Quantisation& q, const CentreData& c,
                                 const CertificateOptions& copts) {
  ChowCertificate cert;
  Eigen::VectorXd y = c.mu_hat.cwiseInverse();
  AffineFit fit = fit_affine_in_alpha(q.alphas, y);
  cert.c = fit.c;
  cert.lambda = fit.lambda;
  cert.fit_remainder = fit.remainder;

  if (copts.direction_override != nullptr) {
    if (copts.direction_override->size() != static_cast<size_t>(q.n))
      throw ConfigError("certificate direction has wrong dimension");
    cert.direction = *copts.direction_override;
  } else {
    cert.direction = rationalize_direction(fit.lambda, copts.max_denominator);
  }

  std::vector<long> key(q.N);
  for (long a = 0; a < q.N; ++a) {
    long s = 0;
    for (int d = 0; d < q.n; ++d) s += cert.direction[d] * q.alphas[a][d];
    key[a] = s;
  }
  std::vector<long> distinct(key);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<long> block_of(q.N);
  std::vector<double> sum(distinct.size(), 0.0);
  std::vector<long> count(distinct.size(), 0);
  for (long a = 0; a < q.N; ++a) {
    size_t nu = std::lower_bound(distinct.begin(), distinct.end(), key[a]) -
                distinct.begin();
    block_of[a] = static_cast<long>(nu);
    sum[nu] += c.mu_hat(a);
    ++count[nu];
  }
  cert.block_keys.assign(distinct.begin(), distinct.end());
  cert.b.resize(distinct.size());
  for (size_t nu = 0; nu < distinct.size(); ++nu) {
    cert.b[nu] = sum[nu] / count[nu];
    if (!(cert.b[nu] > 0))
      throw NumericalError("certificate: non-positive block constant");
  }
  cert.block_spread = 0;
  for (long a = 0; a < q.N; ++a)
    cert.block_spread = std::max(cert.block_spread,
                                 std::abs(c.mu_hat(a) - cert.b[block_of[a]]));

  cert.partition_residual = 0;
  for (size_t i = 0; i < q.nodes(); ++i) {
    double s = 0;
    for (long a = 0; a < q.N; ++a)
      s += cert.b[block_of[a]] * c.p(i, a) / c.mu_hat(a);
    cert.partition_residual =
        std::max(cert.partition_residual, std::abs(s - 1.0));
  }

  cert.polystable = true;
  if (cert.fit_remainder > copts.fit_tolerance) {
    cert.polystable = false;
    cert.reason = "inverse centre of mass is not affine in the weights";
  } else if (cert.block_spread > copts.spread_tolerance) {
    cert.polystable = false;
    cert.reason = "centre of mass is not constant on weight blocks";
  } else if (cert.partition_residual > copts.partition_tolerance) {
    cert.polystable = false;
    cert.reason = "block partition of unity failed";
  }
  return cert;
}

double limit_weight_term(const Eigen::VectorXd& B_centred,
                         const Eigen::VectorXd& m_vals, double V, long N) {
  if (B_centred.size() != m_vals.size())
    throw InvariantError("limit_weight_term: shape mismatch");
  return V / static_cast<double>(N) *
         (B_centred.array() / m_vals.array()).sum();
}

}  // namespace qel
