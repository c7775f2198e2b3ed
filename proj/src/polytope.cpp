#include "qel/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qel {

namespace {

long gcd_abs(long a, long b) { return std::gcd(std::abs(a), std::abs(b)); }

bool is_primitive(const std::vector<long>& v) {
  long g = 0;
  for (long c : v) g = std::gcd(g, std::abs(c));
  return g == 1;
}

Rational dot(const std::vector<long>& n, const std::vector<Rational>& x) {
  Rational acc = 0;
  for (size_t i = 0; i < n.size(); ++i) acc += Rational(n[i]) * x[i];
  return acc;
}

// integral of a product of two affine functions over a triangle, given the
// (exact) values of each at the three vertices and twice the signed area
Rational triangle_pair_integral(const Rational& two_area, const Rational f[3],
                                const Rational g[3]) {
  Rational pointwise = 0, sf = 0, sg = 0;
  for (int a = 0; a < 3; ++a) {
    pointwise += f[a] * g[a];
    sf += f[a];
    sg += g[a];
  }
  return two_area / 24 * (pointwise + sf * sg);
}

Rational eval_monomial(const std::vector<int>& e,
                       const std::vector<Rational>& x) {
  Rational acc = 1;
  for (size_t i = 0; i < e.size(); ++i)
    for (int p = 0; p < e[i]; ++p) acc *= x[i];
  return acc;
}

}  // namespace

DelzantPolytope DelzantPolytope::from_facets(
    int dim, std::vector<std::vector<long>> normals,
    std::vector<Rational> offsets) {
  if (dim != 1 && dim != 2)
    throw ConfigError("polytope: dimension must be 1 or 2, got " +
                      std::to_string(dim));
  if (normals.size() != offsets.size())
    throw ConfigError("polytope: facet normals and offsets differ in count");
  if (normals.size() < static_cast<size_t>(dim + 1))
    throw ConfigError("polytope: need at least dim+1 facets");
  for (size_t i = 0; i < normals.size(); ++i) {
    if (normals[i].size() != static_cast<size_t>(dim))
      throw ConfigError("polytope: facet " + std::to_string(i) +
                        " normal has wrong length");
    if (!is_primitive(normals[i]))
      throw ConfigError("polytope: facet " + std::to_string(i) +
                        " normal is not a primitive integer vector");
  }

  DelzantPolytope P;
  P.dim_ = dim;
  P.normals_ = std::move(normals);
  P.offsets_ = std::move(offsets);
  const size_t m = P.normals_.size();

  // candidate vertices from facet intersections, kept when feasible
  std::vector<std::vector<Rational>> verts;
  std::vector<std::vector<size_t>> active;  // facets through each vertex
  auto push_candidate = [&](const std::vector<Rational>& v) {
    for (size_t i = 0; i < m; ++i)
      if (dot(P.normals_[i], v) + P.offsets_[i] < 0) return;
    for (const auto& w : verts)
      if (w == v) return;
    std::vector<size_t> act;
    for (size_t i = 0; i < m; ++i)
      if (dot(P.normals_[i], v) + P.offsets_[i] == 0) act.push_back(i);
    verts.push_back(v);
    active.push_back(std::move(act));
  };

  if (dim == 1) {
    for (size_t i = 0; i < m; ++i)
      push_candidate({-P.offsets_[i] / P.normals_[i][0]});
  } else {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = i + 1; j < m; ++j) {
        const auto &a = P.normals_[i], &b = P.normals_[j];
        long det = a[0] * b[1] - a[1] * b[0];
        if (det == 0) continue;
        Rational d(det);
        Rational x = (-P.offsets_[i] * b[1] + P.offsets_[j] * a[1]) / d;
        Rational y = (-P.offsets_[j] * a[0] + P.offsets_[i] * b[0]) / d;
        push_candidate({x, y});
      }
  }

  if (verts.size() < static_cast<size_t>(dim + 1))
    throw ConfigError("polytope: region is empty, lower-dimensional or "
                      "unbounded (found " + std::to_string(verts.size()) +
                      " vertices)");

  // simplicity + Delzant condition at every vertex
  for (size_t v = 0; v < verts.size(); ++v) {
    if (active[v].size() != static_cast<size_t>(dim))
      throw ConfigError("polytope: vertex " + std::to_string(v) + " lies on " +
                        std::to_string(active[v].size()) +
                        " facets (polytope is not simple)");
    if (dim == 2) {
      const auto& a = P.normals_[active[v][0]];
      const auto& b = P.normals_[active[v][1]];
      long det = a[0] * b[1] - a[1] * b[0];
      if (det != 1 && det != -1)
        throw ConfigError(
            "polytope: facet normals at a vertex have determinant " +
            std::to_string(det) + ", not a lattice basis");
    }
  }

  // each facet must carry a full (dim-1)-face: dim vertices touch it in
  // dim 2 (an edge), one vertex in dim 1; anything else means a redundant
  // or merely tangent facet, or an unbounded direction
  for (size_t i = 0; i < m; ++i) {
    size_t cnt = 0;
    for (size_t v = 0; v < verts.size(); ++v)
      if (std::find(active[v].begin(), active[v].end(), i) != active[v].end())
        ++cnt;
    if (cnt != static_cast<size_t>(dim))
      throw ConfigError("polytope: facet " + std::to_string(i) + " touches " +
                        std::to_string(cnt) +
                        " vertices; expected " + std::to_string(dim) +
                        " (redundant facet or unbounded region)");
  }

  // integral vertices
  for (const auto& v : verts)
    for (const auto& c : v)
      if (denominator(c) != 1)
        throw ConfigError(
            "polytope: vertex with non-integer coordinate " +
            c.str() + "; lattice vertices are required");

  if (dim == 1) {
    std::sort(verts.begin(), verts.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
  } else {
    // counter-clockwise around the centroid, exact comparisons
    std::vector<Rational> c(2, 0);
    for (const auto& v : verts) {
      c[0] += v[0];
      c[1] += v[1];
    }
    c[0] /= static_cast<long>(verts.size());
    c[1] /= static_cast<long>(verts.size());
    auto half = [&](const std::vector<Rational>& v) {
      Rational dy = v[1] - c[1], dx = v[0] - c[0];
      return (dy > 0 || (dy == 0 && dx > 0)) ? 0 : 1;
    };
    std::sort(verts.begin(), verts.end(),
              [&](const std::vector<Rational>& p, const std::vector<Rational>& q) {
                int hp = half(p), hq = half(q);
                if (hp != hq) return hp < hq;
                Rational cross = (p[0] - c[0]) * (q[1] - c[1]) -
                                 (p[1] - c[1]) * (q[0] - c[0]);
                return cross > 0;
              });
    size_t lo = 0;
    for (size_t i = 1; i < verts.size(); ++i)
      if (verts[i] < verts[lo]) lo = i;
    std::rotate(verts.begin(), verts.begin() + lo, verts.end());
  }

  P.verts_ = std::move(verts);
  if (P.dim_ == 2 && P.volume() <= 0)
    throw ConfigError("polytope: vertex ordering produced non-positive area");
  return P;
}

std::vector<double> DelzantPolytope::vertex_d(size_t i) const {
  std::vector<double> out(dim_);
  for (int j = 0; j < dim_; ++j)
    out[j] = static_cast<double>(verts_[i][j]);
  return out;
}

double DelzantPolytope::ell(size_t i, const std::vector<double>& x) const {
  double acc = static_cast<double>(offsets_[i]);
  for (int j = 0; j < dim_; ++j) acc += normals_[i][j] * x[j];
  return acc;
}

bool DelzantPolytope::contains(const std::vector<double>& x, double tol) const {
  for (size_t i = 0; i < num_facets(); ++i)
    if (ell(i, x) < -tol) return false;
  return true;
}

Rational DelzantPolytope::moment(const std::vector<int>& exponent) const {
  if (exponent.size() != static_cast<size_t>(dim_))
    throw InvariantError("moment: exponent length mismatch");
  int total = 0;
  for (int e : exponent) total += e;
  if (total > 2) throw InvariantError("moment: degree > 2 unsupported");

  if (dim_ == 1) {
    const Rational &a = verts_[0][0], &b = verts_[1][0];
    int e = exponent[0];
    Rational bp = 1, ap = 1;
    for (int p = 0; p <= e; ++p) {
      bp *= b;
      ap *= a;
    }
    return (bp - ap) / (e + 1);
  }

  // split the monomial into two affine factors
  std::vector<int> f_idx, g_idx;  // -1 encodes the constant function 1
  {
    std::vector<int> parts;
    for (int i = 0; i < 2; ++i)
      for (int p = 0; p < exponent[i]; ++p) parts.push_back(i);
    while (parts.size() < 2) parts.push_back(-1);
    f_idx = {parts[0]};
    g_idx = {parts[1]};
  }
  auto affine = [&](int idx, const std::vector<Rational>& v) {
    return idx < 0 ? Rational(1) : v[idx];
  };

  Rational acc = 0;
  for (size_t t = 1; t + 1 < verts_.size(); ++t) {
    const auto &v0 = verts_[0], &v1 = verts_[t], &v2 = verts_[t + 1];
    Rational two_area = (v1[0] - v0[0]) * (v2[1] - v0[1]) -
                        (v1[1] - v0[1]) * (v2[0] - v0[0]);
    Rational f[3] = {affine(f_idx[0], v0), affine(f_idx[0], v1),
                     affine(f_idx[0], v2)};
    Rational g[3] = {affine(g_idx[0], v0), affine(g_idx[0], v1),
                     affine(g_idx[0], v2)};
    acc += triangle_pair_integral(two_area, f, g);
  }
  return acc;
}

Rational DelzantPolytope::boundary_moment(const std::vector<int>& exponent) const {
  if (exponent.size() != static_cast<size_t>(dim_))
    throw InvariantError("boundary_moment: exponent length mismatch");
  int total = 0;
  for (int e : exponent) total += e;
  if (total > 1) throw InvariantError("boundary_moment: degree > 1 unsupported");

  if (dim_ == 1)
    return eval_monomial(exponent, verts_[0]) +
           eval_monomial(exponent, verts_[1]);

  Rational acc = 0;
  const size_t nv = verts_.size();
  for (size_t i = 0; i < nv; ++i) {
    const auto &a = verts_[i], &b = verts_[(i + 1) % nv];
    long dx = static_cast<long>(numerator(Rational(b[0] - a[0])));
    long dy = static_cast<long>(numerator(Rational(b[1] - a[1])));
    Rational sigma_len(gcd_abs(dx, dy));
    std::vector<Rational> mid = {(a[0] + b[0]) / 2, (a[1] + b[1]) / 2};
    acc += sigma_len * eval_monomial(exponent, mid);
  }
  return acc;
}

std::vector<std::vector<long>> DelzantPolytope::lattice_points(long k) const {
  if (k < 1) throw ConfigError("lattice_points: k must be positive");
  std::vector<long> lo(dim_), hi(dim_);
  for (int j = 0; j < dim_; ++j) {
    Rational mn = verts_[0][j], mx = verts_[0][j];
    for (const auto& v : verts_) {
      mn = std::min(mn, v[j]);
      mx = std::max(mx, v[j]);
    }
    lo[j] = static_cast<long>(numerator(mn)) * k;
    hi[j] = static_cast<long>(numerator(mx)) * k;
  }

  std::vector<std::vector<long>> pts;
  auto feasible = [&](const std::vector<long>& x) {
    for (size_t i = 0; i < num_facets(); ++i) {
      Rational acc = Rational(k) * offsets_[i];
      for (int j = 0; j < dim_; ++j) acc += Rational(normals_[i][j]) * x[j];
      if (acc < 0) return false;
    }
    return true;
  };
  if (dim_ == 1) {
    for (long x = lo[0]; x <= hi[0]; ++x)
      if (feasible({x})) pts.push_back({x});
  } else {
    for (long x = lo[0]; x <= hi[0]; ++x)
      for (long y = lo[1]; y <= hi[1]; ++y)
        if (feasible({x, y})) pts.push_back({x, y});
  }
  return pts;
}

}  // namespace qel
