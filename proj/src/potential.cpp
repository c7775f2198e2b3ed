#include "qel/potential.hpp"

#include <cmath>
#include <string>

#include "qel/common.hpp"

namespace qel {

namespace {

std::string point_str(const std::vector<double>& x) {
  std::string s = "(";
  for (size_t i = 0; i < x.size(); ++i)
    s += (i ? ", " : "") + std::to_string(x[i]);
  return s + ")";
}

}  // namespace

double PolynomialPerturbation::value(const std::vector<double>& x) const {
  double acc = 0.0;
  for (const auto& [e, c] : terms) {
    double t = c;
    for (size_t i = 0; i < e.size(); ++i)
      for (int p = 0; p < e[i]; ++p) t *= x[i];
    acc += t;
  }
  return acc;
}

double PolynomialPerturbation::derivative(const std::vector<int>& d,
                                          const std::vector<double>& x) const {
  double acc = 0.0;
  for (const auto& [e, c] : terms) {
    double t = c;
    bool dead = false;
    for (size_t i = 0; i < e.size() && !dead; ++i) {
      int rem = e[i] - d[i];
      if (rem < 0) {
        dead = true;
        break;
      }
      for (int p = 0; p < d[i]; ++p) t *= (e[i] - p);
      for (int p = 0; p < rem; ++p) t *= x[i];
    }
    if (!dead) acc += t;
  }
  return acc;
}

SymplecticPotential::SymplecticPotential(DelzantPolytope P,
                                         PolynomialPerturbation pert)
    : P_(std::move(P)), pert_(std::move(pert)) {
  for (const auto& [e, c] : pert_.terms) {
    (void)c;
    if (e.size() != static_cast<size_t>(P_.dim()))
      throw ConfigError("perturbation: exponent length differs from dimension");
    for (int p : e)
      if (p < 0) throw ConfigError("perturbation: negative exponent");
  }
}

double SymplecticPotential::value(const std::vector<double>& x) const {
  double acc = 0.0;
  for (size_t i = 0; i < P_.num_facets(); ++i) {
    double l = P_.ell(i, x);
    if (l <= 0.0)
      throw NumericalError("potential: evaluation outside the open polytope at " +
                           point_str(x));
    acc += 0.5 * l * std::log(l);
  }
  return acc + pert_.value(x);
}

Eigen::VectorXd SymplecticPotential::gradient(const std::vector<double>& x) const {
  const int n = dim();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < P_.num_facets(); ++i) {
    double l = P_.ell(i, x);
    if (l <= 0.0)
      throw NumericalError("potential: evaluation outside the open polytope at " +
                           point_str(x));
    double f = 0.5 * (std::log(l) + 1.0);
    for (int j = 0; j < n; ++j) g[j] += P_.normal(i)[j] * f;
  }
  if (!pert_.empty()) {
    std::vector<int> d(n, 0);
    for (int j = 0; j < n; ++j) {
      d[j] = 1;
      g[j] += pert_.derivative(d, x);
      d[j] = 0;
    }
  }
  return g;
}

Eigen::MatrixXd SymplecticPotential::hessian(const std::vector<double>& x) const {
  const int n = dim();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < P_.num_facets(); ++i) {
    double l = P_.ell(i, x);
    if (l <= 0.0)
      throw NumericalError("potential: evaluation outside the open polytope at " +
                           point_str(x));
    const auto& nd = P_.normal(i);
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) w(j, m) += 0.5 * nd[j] * nd[m] / l;
  }
  if (!pert_.empty()) {
    std::vector<int> d(n, 0);
    for (int j = 0; j < n; ++j)
      for (int m = j; m < n; ++m) {
        d[j] += 1;
        d[m] += 1;
        double v = pert_.derivative(d, x);
        w(j, m) += v;
        if (m != j) w(m, j) += v;
        d[j] = 0;
        d[m] = 0;
      }
  }
  return w;
}

Eigen::MatrixXd SymplecticPotential::hessian_inverse(
    const std::vector<double>& x) const {
  Eigen::MatrixXd w = hessian(x);
  if (dim() == 1) {
    if (w(0, 0) <= 0.0)
      throw NumericalError("potential: Hessian not positive at " + point_str(x));
    return Eigen::MatrixXd::Constant(1, 1, 1.0 / w(0, 0));
  }
  double det = w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0);
  if (det <= 0.0 || w(0, 0) <= 0.0)
    throw NumericalError("potential: Hessian not positive definite at " +
                         point_str(x));
  Eigen::MatrixXd u(2, 2);
  u << w(1, 1), -w(0, 1), -w(1, 0), w(0, 0);
  return u / det;
}

double SymplecticPotential::third_derivative(int a, int b, int c,
                                             const std::vector<double>& x) const {
  double acc = 0.0;
  for (size_t i = 0; i < P_.num_facets(); ++i) {
    double l = P_.ell(i, x);
    const auto& nd = P_.normal(i);
    acc -= 0.5 * nd[a] * nd[b] * nd[c] / (l * l);
  }
  if (!pert_.empty()) {
    std::vector<int> d(dim(), 0);
    d[a] += 1;
    d[b] += 1;
    d[c] += 1;
    acc += pert_.derivative(d, x);
  }
  return acc;
}

double SymplecticPotential::fourth_derivative(int a, int b, int c, int d,
                                              const std::vector<double>& x) const {
  double acc = 0.0;
  for (size_t i = 0; i < P_.num_facets(); ++i) {
    double l = P_.ell(i, x);
    const auto& nd = P_.normal(i);
    acc += nd[a] * nd[b] * nd[c] * nd[d] / (l * l * l);
  }
  if (!pert_.empty()) {
    std::vector<int> dd(dim(), 0);
    dd[a] += 1;
    dd[b] += 1;
    dd[c] += 1;
    dd[d] += 1;
    acc += pert_.derivative(dd, x);
  }
  return acc;
}

double SymplecticPotential::scalar_curvature(const std::vector<double>& x) const {
  const int n = dim();
  Eigen::MatrixXd u = hessian_inverse(x);

  // first and second derivatives of U = W^{-1}:
  //   d_a U = -U (d_a W) U
  //   d_b d_a U = -[(d_b U)(d_a W)U + U(d_b d_a W)U + U(d_a W)(d_b U)]
  std::vector<Eigen::MatrixXd> w1(n), du(n);
  for (int a = 0; a < n; ++a) {
    w1[a].resize(n, n);
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) w1[a](j, m) = third_derivative(a, j, m, x);
  }
  for (int a = 0; a < n; ++a) du[a] = -u * w1[a] * u;

  double s = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Eigen::MatrixXd w2(n, n);
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) w2(j, m) = fourth_derivative(a, b, j, m, x);
      Eigen::MatrixXd dba = -(du[b] * w1[a] * u + u * w2 * u + u * w1[a] * du[b]);
      s += dba(a, b);
    }
  return -M_PI * s;
}

double SymplecticPotential::mean_scalar_curvature() const {
  std::vector<int> zero(dim(), 0);
  double a0 = static_cast<double>(P_.volume());
  double a1 = 0.5 * static_cast<double>(P_.boundary_moment(zero));
  return 4.0 * M_PI * a1 / a0;
}

std::vector<double> SymplecticPotential::moment_from_log(
    const std::vector<double>& xi) const {
  const int n = dim();
  // start from the barycentre of the vertices; damped Newton on grad u = xi
  std::vector<double> x(n, 0.0);
  for (size_t v = 0; v < P_.vertices().size(); ++v) {
    auto vd = P_.vertex_d(v);
    for (int j = 0; j < n; ++j) x[j] += vd[j];
  }
  for (int j = 0; j < n; ++j) x[j] /= static_cast<double>(P_.vertices().size());

  Eigen::Map<const Eigen::VectorXd> target(xi.data(), n);
  Eigen::VectorXd r = gradient(x) - target;
  for (int it = 0; it < 200; ++it) {
    if (r.norm() < 1e-13) return x;
    Eigen::VectorXd step = hessian(x).ldlt().solve(r);
    double tau = 1.0;
    std::vector<double> trial(n);
    for (int half = 0; half < 60; ++half) {
      for (int j = 0; j < n; ++j) trial[j] = x[j] - tau * step[j];
      if (P_.contains(trial, -1e-15)) {
        bool interior = true;
        for (size_t f = 0; f < P_.num_facets(); ++f)
          if (P_.ell(f, trial) <= 0.0) interior = false;
        if (interior) {
          Eigen::VectorXd rt = gradient(trial) - target;
          if (rt.norm() < r.norm() || tau < 1e-8) {
            x = trial;
            r = rt;
            break;
          }
        }
      }
      tau *= 0.5;
      if (half == 59)
        throw NumericalError("moment_from_log: line search failed");
    }
  }
  if (r.norm() > 1e-9)
    throw NumericalError("moment_from_log: Newton did not converge, residual " +
                         std::to_string(r.norm()));
  return x;
}

double SymplecticPotential::kahler_value(const std::vector<double>& xi) const {
  auto x = moment_from_log(xi);
  double acc = -value(x);
  for (int j = 0; j < dim(); ++j) acc += x[j] * xi[j];
  return acc;
}

void SymplecticPotential::check_convex(const QuadratureRule& rule) const {
  for (size_t i = 0; i < rule.size(); ++i) {
    const auto& x = rule.points[i];
    Eigen::MatrixXd w = hessian(x);
    bool ok = dim() == 1 ? w(0, 0) > 0.0
                         : (w(0, 0) > 0.0 &&
                            w(0, 0) * w(1, 1) - w(0, 1) * w(1, 0) > 0.0);
    if (!ok)
      throw ConfigError(
          "potential: perturbation destroys convexity near " + point_str(x));
  }
}

}  // namespace qel
