#include "qel/quantisation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "qel/common.hpp"

namespace qel {

namespace {

Eigen::VectorXd to_vec(const std::vector<double>& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

double det_small(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

// J = det(Hess_xi of k phi_H) / det(Hess_xi of k phi_model) at one node,
// from the weight covariance: Hess_xi(k phi_H) = 2 C.
double volume_ratio(const Eigen::MatrixXd& C, double k, double detU,
                    size_t node) {
  Eigen::MatrixXd num = (2.0 / k) * C;
  double d = det_small(num);
  if (!(d > 0.0) || !(num.trace() > 0.0))
    throw NumericalError("Fubini-Study metric degenerate at node " +
                         std::to_string(node));
  return d / detU;
}

}  // namespace

Quantisation make_quantisation(const SymplecticPotential& pot, long k,
                               int order) {
  if (k < 1) throw ConfigError("quantisation level k must be >= 1");
  Quantisation q;
  q.pot = &pot;
  q.k = k;
  const DelzantPolytope& P = pot.polytope();
  q.n = P.dim();
  q.alphas = P.lattice_points(k);
  q.N = static_cast<long>(q.alphas.size());
  q.V = static_cast<double>(P.moment(std::vector<int>(q.n, 0)));
  q.rule = interior_rule(P, order);

  const size_t m = q.rule.weights.size();
  q.xi.resize(m);
  q.W.resize(m);
  q.U.resize(m);
  q.detU.resize(m);
  q.phi_model.resize(m);
  q.logD.resize(m, q.N);
  q.Phi_base.resize(m);
  q.phi_base.resize(m);

  const bool perturbed = pot.perturbed();
  SymplecticPotential base(P);

  for (size_t i = 0; i < m; ++i) {
    const std::vector<double>& x = q.rule.points[i];
    Eigen::VectorXd xv = to_vec(x);
    q.xi[i] = pot.gradient(x);
    q.W[i] = pot.hessian(x);
    q.U[i] = pot.hessian_inverse(x);
    q.detU(i) = det_small(q.U[i]);
    double uval = pot.value(x);
    q.phi_model(i) = xv.dot(q.xi[i]) - uval;
    for (long a = 0; a < q.N; ++a) {
      double dot = 0;
      for (int d = 0; d < q.n; ++d)
        dot += (static_cast<double>(q.alphas[a][d]) - k * x[d]) * q.xi[i](d);
      q.logD(i, a) = 2.0 * dot + 2.0 * k * uval;
    }
    if (perturbed) {
      std::vector<double> xi_std(q.xi[i].data(), q.xi[i].data() + q.n);
      std::vector<double> xg = base.moment_from_log(xi_std);
      q.Phi_base[i] = base.hessian_inverse(xg);
      q.phi_base(i) = to_vec(xg).dot(q.xi[i]) - base.value(xg);
    } else {
      q.Phi_base[i] = q.U[i];
      q.phi_base(i) = q.phi_model(i);
    }
  }
  return q;
}

Eigen::VectorXd hilb_log(const Quantisation& q) {
  const size_t m = q.nodes();
  const double lead = std::log(static_cast<double>(q.N) / q.V);
  Eigen::VectorXd eta(q.N);
  for (long a = 0; a < q.N; ++a) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < m; ++i)
      mx = std::max(mx, std::log(q.node_weight(i)) + q.logD(i, a));
    double s = 0;
    for (size_t i = 0; i < m; ++i)
      s += std::exp(std::log(q.node_weight(i)) + q.logD(i, a) - mx);
    eta(a) = lead + mx + std::log(s);
  }
  return eta;
}

BergmanSample bergman(const Quantisation& q, const Eigen::VectorXd& eta) {
  if (eta.size() != q.N)
    throw InvariantError("bergman: eta has wrong dimension");
  const size_t m = q.nodes();
  BergmanSample out;
  out.rho_bar.resize(m);
  out.grad_xi.resize(m, q.n);
  out.grad_x.resize(m, q.n);
  for (size_t i = 0; i < m; ++i) {
    double rho = 0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q.n);
    for (long a = 0; a < q.N; ++a) {
      double d = std::exp(q.logD(i, a) - eta(a));
      rho += d;
      for (int c = 0; c < q.n; ++c)
        g(c) += 2.0 * (static_cast<double>(q.alphas[a][c]) -
                       q.k * q.rule.points[i][c]) *
                d;
    }
    out.rho_bar(i) = rho;
    out.grad_xi.row(i) = g.transpose();
    out.grad_x.row(i) = (q.W[i] * g).transpose();
    out.integral_rho += q.node_weight(i) * rho;
  }
  out.integral_rho *= static_cast<double>(q.N) / q.V;
  return out;
}

CentreData centre_of_mass(const Quantisation& q, const Eigen::VectorXd& eta) {
  if (eta.size() != q.N)
    throw InvariantError("centre_of_mass: eta has wrong dimension");
  const size_t m = q.nodes();
  CentreData c;
  c.mu_hat = Eigen::VectorXd::Zero(q.N);
  c.p.resize(m, q.N);
  c.logK.resize(m);
  c.m1.resize(m, q.n);
  c.C.resize(m);
  c.J.resize(m);
  for (size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long a = 0; a < q.N; ++a)
      mx = std::max(mx, q.logD(i, a) - eta(a));
    double s = 0;
    for (long a = 0; a < q.N; ++a) s += std::exp(q.logD(i, a) - eta(a) - mx);
    c.logK(i) = mx + std::log(s);

    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(q.n);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(q.n, q.n);
    for (long a = 0; a < q.N; ++a) {
      double p = std::exp(q.logD(i, a) - eta(a) - c.logK(i));
      c.p(i, a) = p;
      Eigen::VectorXd av(q.n);
      for (int d = 0; d < q.n; ++d) av(d) = static_cast<double>(q.alphas[a][d]);
      m1 += p * av;
      m2 += p * av * av.transpose();
    }
    c.m1.row(i) = m1.transpose();
    c.C[i] = m2 - m1 * m1.transpose();
    c.J(i) = volume_ratio(c.C[i], static_cast<double>(q.k), q.detU(i), i);
  }
  for (size_t i = 0; i < m; ++i) {
    double w = q.node_weight(i) * c.J(i) * static_cast<double>(q.N) / q.V;
    for (long a = 0; a < q.N; ++a) c.mu_hat(a) += w * c.p(i, a);
  }
  for (long a = 0; a < q.N; ++a)
    if (!(c.mu_hat(a) > 0.0))
      throw NumericalError("centre of mass has a non-positive entry");
  return c;
}

FsBergman fs_bergman(const Quantisation& q, const CentreData& c) {
  const size_t m = q.nodes();
  FsBergman out;
  out.rho_bar.resize(m);
  out.grad_xi.resize(m, q.n);
  for (size_t i = 0; i < m; ++i) {
    double rho = 0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q.n);
    for (long a = 0; a < q.N; ++a) {
      double t = c.p(i, a) / c.mu_hat(a);
      rho += t;
      for (int d = 0; d < q.n; ++d)
        g(d) += 2.0 * t * (static_cast<double>(q.alphas[a][d]) - c.m1(i, d));
    }
    out.rho_bar(i) = rho;
    out.grad_xi.row(i) = g.transpose();
  }
  return out;
}

double rawnsley_residual(const Quantisation& q) {
  Eigen::VectorXd eta = hilb_log(q);
  BergmanSample b = bergman(q, eta);
  CentreData c = centre_of_mass(q, eta);
  double worst = 0;
  for (size_t i = 0; i < q.nodes(); ++i)
    worst = std::max(worst,
                     std::abs(std::exp(c.logK(i)) / b.rho_bar(i) - 1.0));
  return worst;
}

void check_hermitian_positive(const Eigen::MatrixXcd& H) {
  double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw NumericalError("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("matrix is not positive definite");
}

Eigen::MatrixXcd centre_of_mass_full(const Quantisation& q,
                                     const Eigen::MatrixXcd& H) {
  if (q.n != 1)
    throw InvariantError(
        "full-matrix centre of mass requires a one-dimensional polytope");
  if (H.rows() != q.N || H.cols() != q.N)
    throw InvariantError("centre_of_mass_full: H has wrong dimension");
  check_hermitian_positive(H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  Eigen::MatrixXcd B = es.operatorInverseSqrt();  // H^{-1/2}, Hermitian

  const long M = 4 * q.k + 8;
  const double two_pi = 2.0 * std::acos(-1.0);
  const size_t m = q.nodes();
  Eigen::MatrixXcd mu = Eigen::MatrixXcd::Zero(q.N, q.N);
  Eigen::VectorXcd t(q.N), ct(q.N), f(q.N), g(q.N);
  for (size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long a = 0; a < q.N; ++a) mx = std::max(mx, 0.5 * q.logD(i, a));
    const double x = q.rule.points[i][0];
    const double Ui = q.U[i](0, 0);
    for (long mm = 0; mm < M; ++mm) {
      double theta = two_pi * static_cast<double>(mm) / M;
      for (long a = 0; a < q.N; ++a) {
        double amp = std::exp(0.5 * q.logD(i, a) - mx);
        double ang = theta * static_cast<double>(q.alphas[a][0]);
        t(a) = std::polar(amp, ang);
        ct(a) = (static_cast<double>(q.alphas[a][0]) - q.k * x) * t(a);
      }
      f = B.transpose() * t;
      g = B.transpose() * ct;
      double K = f.squaredNorm();
      double W2 = g.squaredNorm();
      std::complex<double> W1 = f.dot(g);
      double lap = 2.0 * (W2 / K - std::norm(W1) / (K * K));
      double J = lap / (q.k * Ui);
      if (!(J > 0.0))
        throw NumericalError("Fubini-Study metric degenerate at node " +
                             std::to_string(i));
      mu += (q.node_weight(i) * J / (K * static_cast<double>(M))) *
            (f * f.adjoint());
    }
  }
  mu *= static_cast<double>(q.N) / q.V;  // trace-N normalisation
  mu = 0.5 * (mu + mu.adjoint()).eval();
  return mu;
}

Eigen::MatrixXcd t_operator_full(const Quantisation& q,
                                 const Eigen::MatrixXcd& H) {
  Eigen::MatrixXcd mu = centre_of_mass_full(q, H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  Eigen::MatrixXcd R = es.operatorSqrt();
  Eigen::MatrixXcd out = R * mu * R;
  return 0.5 * (out + out.adjoint());
}

Eigen::VectorXd t_operator(const Quantisation& q, const Eigen::VectorXd& eta) {
  CentreData c = centre_of_mass(q, eta);
  return eta + c.mu_hat.array().log().matrix();
}

}  // namespace qel
