#include "qel/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "qel/common.hpp"

namespace qel {

void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (order < 1 || order > 512)
    throw ConfigError("gauss_legendre: order must be in [1, 512]");
  const int n = order;
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

QuadratureRule interior_rule(const DelzantPolytope& P, int order) {
  std::vector<double> gx, gw;
  gauss_legendre(order, gx, gw);

  QuadratureRule rule;
  if (P.dim() == 1) {
    double a = static_cast<double>(P.vertices()[0][0]);
    double b = static_cast<double>(P.vertices()[1][0]);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < order; ++i) {
      rule.points.push_back({mid + half * gx[i]});
      rule.weights.push_back(half * gw[i]);
    }
    return rule;
  }

  // strip boundaries at distinct vertex x-coordinates
  std::vector<double> cuts;
  for (const auto& v : P.vertices())
    cuts.push_back(static_cast<double>(v[0]));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto y_bounds = [&](double x, double& ylo, double& yhi) {
    ylo = -1e300;
    yhi = 1e300;
    for (size_t i = 0; i < P.num_facets(); ++i) {
      const auto& nrm = P.normal(i);
      if (nrm[1] == 0) continue;
      double bound =
          -(static_cast<double>(P.offset(i)) + nrm[0] * x) / nrm[1];
      if (nrm[1] > 0)
        ylo = std::max(ylo, bound);
      else
        yhi = std::min(yhi, bound);
    }
  };

  for (size_t s = 0; s + 1 < cuts.size(); ++s) {
    double xl = cuts[s], xr = cuts[s + 1];
    if (xr - xl < 1e-14) continue;
    double xmid = 0.5 * (xl + xr), xhalf = 0.5 * (xr - xl);
    for (int i = 0; i < order; ++i) {
      double x = xmid + xhalf * gx[i];
      double ylo, yhi;
      y_bounds(x, ylo, yhi);
      if (yhi <= ylo) continue;
      double ymid = 0.5 * (ylo + yhi), yhalf = 0.5 * (yhi - ylo);
      for (int j = 0; j < order; ++j) {
        rule.points.push_back({x, ymid + yhalf * gx[j]});
        rule.weights.push_back(xhalf * gw[i] * yhalf * gw[j]);
      }
    }
  }
  return rule;
}

}  // namespace qel
