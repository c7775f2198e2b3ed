#include "qel/stability.hpp"

#include <cmath>
#include <string>

#include "qel/common.hpp"

namespace qel {

namespace {

constexpr double kPi = 3.14159265358979323846;

Rational dot(const std::vector<Rational>& lambda,
             const std::vector<long>& alpha) {
  if (lambda.size() != alpha.size())
    throw ConfigError("direction dimension does not match the polytope");
  Rational s = 0;
  for (size_t j = 0; j < lambda.size(); ++j) s += lambda[j] * alpha[j];
  return s;
}

void check_k_list(const DelzantPolytope& P, const std::vector<long>& k_list) {
  size_t need = static_cast<size_t>(P.dim()) + 3;
  if (k_list.size() < need)
    throw ConfigError("k_list must hold at least dim+3 levels, got " +
                      std::to_string(k_list.size()));
  for (size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] < 1) throw ConfigError("k_list entries must be positive");
    if (i > 0 && k_list[i] <= k_list[i - 1])
      throw ConfigError("k_list must be strictly increasing");
  }
}

std::vector<long> target_k_list(int n) {
  std::vector<long> ks;
  for (long k = 1; k <= n + 4; ++k) ks.push_back(k);
  return ks;
}

}  // namespace

LevelGenerator generator_at_level(const DelzantPolytope& P,
                                  const std::vector<Rational>& lambda,
                                  long k) {
  if (k < 1) throw ConfigError("generator level must be positive");
  auto alphas = P.lattice_points(k);
  LevelGenerator g;
  g.N = static_cast<long>(alphas.size());
  g.weights.reserve(alphas.size());
  Rational sum = 0;
  for (const auto& a : alphas) {
    g.weights.push_back(dot(lambda, a));
    sum += g.weights.back();
  }
  g.mean = sum / g.N;
  for (auto& w : g.weights) w -= g.mean;
  return g;
}

Eigen::VectorXd generator_diagonal(const LevelGenerator& g) {
  Eigen::VectorXd d(g.N);
  for (long i = 0; i < g.N; ++i)
    d(i) = static_cast<double>(g.weights[static_cast<size_t>(i)]);
  return d;
}

Rational ExpansionFit::a(int i) const { return n_poly.coeff_of_power(n - i); }

Rational ExpansionFit::b(int i) const {
  return trace_poly.coeff_of_power(n + 1 - i);
}

ExpansionFit fit_expansions(const DelzantPolytope& P,
                            const std::vector<Rational>& lambda,
                            const std::vector<long>& k_list) {
  check_k_list(P, k_list);
  ExpansionFit fit;
  fit.n = P.dim();
  fit.lambda = lambda;
  fit.k_list = k_list;

  std::vector<Rational> counts, traces;
  for (long k : k_list) {
    auto alphas = P.lattice_points(k);
    Rational tr = 0;
    for (const auto& a : alphas) tr += dot(lambda, a);
    counts.push_back(Rational(alphas.size()));
    traces.push_back(tr);
    fit.level_means.push_back(tr / Rational(alphas.size()));
  }
  fit.n_poly = fit_polynomial_exact(k_list, counts, fit.n);
  fit.trace_poly = fit_polynomial_exact(k_list, traces, fit.n + 1);
  if (fit.a(0) != P.volume())
    throw InvariantError(
        "leading dimension coefficient does not equal the volume");
  return fit;
}

Rational chow_weight(const ExpansionFit& fit, long r) {
  if (r < 1) throw ConfigError("chow weight level must be positive");
  Rational nr = fit.n_poly.eval(r);
  Rational tr = fit.trace_poly.eval(r);
  return Rational(r) * fit.b(0) - fit.a(0) * tr / nr;
}

Rational df_invariant(const ExpansionFit& fit) {
  return (fit.a(1) * fit.b(0) - fit.a(0) * fit.b(1)) / fit.a(0);
}

Rational inner_product(const DelzantPolytope& P,
                       const std::vector<Rational>& lambda1,
                       const std::vector<Rational>& lambda2,
                       const std::vector<long>& k_list) {
  check_k_list(P, k_list);
  const int n = P.dim();
  std::vector<Rational> counts, p_vals, q_vals, r_vals;
  for (long k : k_list) {
    auto alphas = P.lattice_points(k);
    Rational p = 0, qs = 0, rs = 0;
    for (const auto& a : alphas) {
      Rational w1 = dot(lambda1, a);
      Rational w2 = dot(lambda2, a);
      p += w1 * w2;
      qs += w1;
      rs += w2;
    }
    counts.push_back(Rational(alphas.size()));
    p_vals.push_back(p);
    q_vals.push_back(qs);
    r_vals.push_back(rs);
  }
  Rational p0 = fit_polynomial_exact(k_list, p_vals, n + 2).coeff_of_power(n + 2);
  Rational q0 = fit_polynomial_exact(k_list, q_vals, n + 1).coeff_of_power(n + 1);
  Rational r0 = fit_polynomial_exact(k_list, r_vals, n + 1).coeff_of_power(n + 1);
  Rational a0 = fit_polynomial_exact(k_list, counts, n).coeff_of_power(n);
  return p0 - q0 * r0 / a0;
}

Rational covariance_pairing(const DelzantPolytope& P,
                            const std::vector<Rational>& lambda1,
                            const std::vector<Rational>& lambda2) {
  const int n = P.dim();
  if (lambda1.size() != static_cast<size_t>(n) ||
      lambda2.size() != static_cast<size_t>(n))
    throw ConfigError("direction dimension does not match the polytope");
  Rational v = P.volume();
  Rational out = 0;
  for (int j = 0; j < n; ++j) {
    std::vector<int> ej(n, 0);
    ej[j] = 1;
    for (int l = 0; l < n; ++l) {
      std::vector<int> el(n, 0);
      el[l] = 1;
      std::vector<int> ejl(n, 0);
      ejl[j] += 1;
      ejl[l] += 1;
      Rational cov = P.moment(ejl) - P.moment(ej) * P.moment(el) / v;
      out += lambda1[static_cast<size_t>(j)] * lambda2[static_cast<size_t>(l)] * cov;
    }
  }
  return out;
}

InnerProductTable inner_product_table(
    const DelzantPolytope& P,
    const std::vector<std::vector<Rational>>& directions,
    const std::vector<long>& k_list) {
  InnerProductTable t;
  t.directions = directions;
  t.k_list = k_list;
  size_t m = directions.size();
  t.pairing.assign(m, std::vector<Rational>(m, Rational(0)));
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i; j < m; ++j) {
      Rational v = inner_product(P, directions[i], directions[j], k_list);
      t.pairing[i][j] = v;
      t.pairing[j][i] = v;
    }
    if (t.pairing[i][i] < 0)
      throw InvariantError("negative self-pairing in the inner product table");
  }
  return t;
}

ExtremalData extremal_normalisation(const DelzantPolytope& P) {
  const int n = P.dim();
  const size_t m = static_cast<size_t>(n) + 1;
  // affine basis f_0 = 1, f_j = x_j; solve [int f_i f_j] c = [2 int_dP f_i]
  std::vector<std::vector<int>> exps(m, std::vector<int>(n, 0));
  for (int j = 0; j < n; ++j) exps[static_cast<size_t>(j) + 1][j] = 1;
  std::vector<std::vector<Rational>> gram(m, std::vector<Rational>(m));
  std::vector<Rational> rhs(m);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      std::vector<int> e(n, 0);
      for (int d = 0; d < n; ++d) e[d] = exps[i][d] + exps[j][d];
      gram[i][j] = P.moment(e);
    }
    rhs[i] = 2 * P.boundary_moment(exps[i]);
  }
  ExtremalData ex;
  ex.s_hat = solve_rational(gram, rhs);
  ex.chi.resize(static_cast<size_t>(n));
  bool zero = true;
  for (int j = 0; j < n; ++j) {
    ex.chi[static_cast<size_t>(j)] = -ex.s_hat[static_cast<size_t>(j) + 1] / 4;
    if (ex.chi[static_cast<size_t>(j)] != 0) zero = false;
  }
  ex.chi_shift = -ex.s_hat[0] / 4;
  ex.df_chi = covariance_pairing(P, ex.chi, ex.chi);
  ex.cscK = zero;
  return ex;
}

Rational relative_df(const DelzantPolytope& P,
                     const std::vector<Rational>& alpha,
                     const ExtremalData& ex, const std::vector<long>& k_list) {
  Rational df = df_invariant(fit_expansions(P, alpha, k_list));
  if (ex.cscK) return df;
  return df - inner_product(P, alpha, ex.chi, k_list);
}

Rational relative_df_basis(const DelzantPolytope& P,
                           const std::vector<Rational>& alpha,
                           const std::vector<std::vector<Rational>>& basis,
                           const std::vector<long>& k_list) {
  std::vector<Rational> norms;
  for (size_t i = 0; i < basis.size(); ++i) {
    norms.push_back(inner_product(P, basis[i], basis[i], k_list));
    if (norms.back() == 0)
      throw ConfigError("degenerate direction in the torus basis");
    for (size_t j = 0; j < i; ++j)
      if (inner_product(P, basis[i], basis[j], k_list) != 0)
        throw ConfigError("torus basis is not orthogonal");
  }
  Rational out = df_invariant(fit_expansions(P, alpha, k_list));
  for (size_t i = 0; i < basis.size(); ++i) {
    Rational proj = inner_product(P, alpha, basis[i], k_list) / norms[i];
    out -= proj * df_invariant(fit_expansions(P, basis[i], k_list));
  }
  return out;
}

EquivariantDensity equivariant_density(const Quantisation& q,
                                       const std::vector<double>& lambda,
                                       double c0) {
  if (lambda.size() != static_cast<size_t>(q.n))
    throw ConfigError("direction dimension does not match the polytope");
  Eigen::VectorXd eta = hilb_log(q);
  BergmanSample bs = bergman(q, eta);

  // exact integer lattice sums scaled by the direction
  std::vector<long> alpha_sum(static_cast<size_t>(q.n), 0);
  for (const auto& a : q.alphas)
    for (int j = 0; j < q.n; ++j) alpha_sum[static_cast<size_t>(j)] += a[j];
  double trace = static_cast<double>(q.N) * static_cast<double>(q.k) * c0;
  for (int j = 0; j < q.n; ++j)
    trace += lambda[static_cast<size_t>(j)] *
             static_cast<double>(alpha_sum[static_cast<size_t>(j)]);

  EquivariantDensity out;
  out.lhs = -q.V * trace / (static_cast<double>(q.k) * static_cast<double>(q.N));

  // quadrature side and the two pointwise densities
  const size_t nodes = q.nodes();
  Eigen::VectorXd qw(q.N);
  for (long a = 0; a < q.N; ++a) {
    double w = static_cast<double>(q.k) * c0;
    for (int j = 0; j < q.n; ++j)
      w += lambda[static_cast<size_t>(j)] *
           static_cast<double>(q.alphas[static_cast<size_t>(a)][j]);
    qw(a) = w;
  }
  out.gram_density.resize(static_cast<long>(nodes));
  out.closed_density.resize(static_cast<long>(nodes));
  double int_psi_rho = 0, int_dpsi_drho = 0;
  for (size_t i = 0; i < nodes; ++i) {
    double psi = c0;
    for (int j = 0; j < q.n; ++j)
      psi += lambda[static_cast<size_t>(j)] * q.rule.points[i][static_cast<size_t>(j)];
    double ldg = 0;  // <lambda, grad_xi rho_bar>
    for (int j = 0; j < q.n; ++j)
      ldg += lambda[static_cast<size_t>(j)] * bs.grad_xi(static_cast<long>(i), j);
    double gram = 0;
    for (long a = 0; a < q.N; ++a)
      gram += qw(a) * std::exp(q.logD(static_cast<long>(i), a) - eta(a));
    out.gram_density(static_cast<long>(i)) = gram;
    out.closed_density(static_cast<long>(i)) =
        static_cast<double>(q.k) * psi * bs.rho_bar(static_cast<long>(i)) +
        0.5 * ldg;
    double w = q.node_weight(i);
    int_psi_rho += w * psi * bs.rho_bar(static_cast<long>(i));
    int_dpsi_drho += w * ldg;
  }
  out.rhs = -int_psi_rho - int_dpsi_drho / (2.0 * static_cast<double>(q.k));
  double slack = 1e-6 * (1.0 + std::abs(out.lhs));
  out.normalisation_ok = std::abs(out.lhs - out.rhs) <= slack;
  return out;
}

double futaki_integral(const SymplecticPotential& pot,
                       const std::vector<double>& lambda, int order) {
  const int n = pot.dim();
  if (lambda.size() != static_cast<size_t>(n))
    throw ConfigError("direction dimension does not match the polytope");
  QuadratureRule rule = interior_rule(pot.polytope(), order);
  const double s_bar = pot.mean_scalar_curvature();
  double sum = 0;
  for (size_t i = 0; i < rule.size(); ++i) {
    double psi = 0;
    for (int j = 0; j < n; ++j)
      psi += lambda[static_cast<size_t>(j)] * rule.points[i][static_cast<size_t>(j)];
    sum += rule.weights[i] * psi * (pot.scalar_curvature(rule.points[i]) - s_bar);
  }
  return sum / (4.0 * kPi);
}

double richardson_limit(const std::vector<long>& ks,
                        const std::vector<double>& values) {
  if (ks.size() != values.size())
    throw ConfigError("level and value counts differ");
  if (ks.size() < 3)
    throw ConfigError("extrapolation needs at least three levels");
  size_t off = ks.size() - 3;
  Eigen::Matrix3d m;
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    double k = static_cast<double>(ks[off + static_cast<size_t>(i)]);
    m(i, 0) = 1.0;
    m(i, 1) = 1.0 / k;
    m(i, 2) = 1.0 / (k * k);
    v(i) = values[off + static_cast<size_t>(i)];
  }
  return m.fullPivLu().solve(v)(0);
}

LimitWeightCheck limit_weight_check(
    const DelzantPolytope& P, const std::vector<long>& ks,
    const std::vector<const SelfConsistentReport*>& reports,
    const std::vector<Rational>& beta, const ExtremalData& ex) {
  if (ks.size() != reports.size())
    throw ConfigError("level and report counts differ");
  LimitWeightCheck out;
  out.ks = ks;
  const double v = static_cast<double>(P.volume());
  for (size_t i = 0; i < ks.size(); ++i) {
    const SelfConsistentReport* rep = reports[i];
    if (rep == nullptr || !rep->converged)
      throw NumericalError("limit weight: run at k=" + std::to_string(ks[i]) +
                           " did not converge");
    LevelGenerator g = generator_at_level(P, beta, ks[i]);
    if (g.N != rep->final_state.A_diag.size())
      throw InvariantError("report dimension does not match the level");
    Eigen::VectorXd m_vals =
        m_values(rep->final_state.A_diag, ks[i], rep->final_state.ca);
    out.terms.push_back(limit_weight_term(generator_diagonal(g), m_vals, v, g.N));
  }
  out.extrapolated = richardson_limit(ks, out.terms);
  out.target =
      static_cast<double>(inner_product(P, beta, ex.chi, target_k_list(P.dim())));
  return out;
}

}  // namespace qel
