#pragma once

#include <vector>

#include "qel/rational.hpp"

namespace qel {

// Convex lattice Delzant polytope P = { x : <normal_i, x> + offset_i >= 0 }
// in dimension 1 or 2.  Construction validates:
//   * primitive integer inward normals,
//   * boundedness and full dimension,
//   * simplicity (each vertex on exactly dim facets) and the Delzant
//     condition (facet normals at each vertex form a lattice basis),
//   * integral vertices (needed so lattice-point counts of k*P are exactly
//     polynomial in k).
// Throws ConfigError describing the first violation found.
class DelzantPolytope {
 public:
  static DelzantPolytope from_facets(int dim,
                                     std::vector<std::vector<long>> normals,
                                     std::vector<Rational> offsets);

  int dim() const { return dim_; }
  size_t num_facets() const { return normals_.size(); }
  const std::vector<long>& normal(size_t i) const { return normals_[i]; }
  const Rational& offset(size_t i) const { return offsets_[i]; }

  // vertices with integer coordinates; dim 1: ascending, dim 2: counter-
  // clockwise starting at the lexicographically smallest vertex
  const std::vector<std::vector<Rational>>& vertices() const { return verts_; }
  std::vector<double> vertex_d(size_t i) const;

  // ell_i(x) = <normal_i, x> + offset_i
  double ell(size_t i, const std::vector<double>& x) const;
  bool contains(const std::vector<double>& x, double tol = 0.0) const;

  // exact interior moments of Lebesgue measure: integral of x^e over P for
  // total degree |e| <= 2
  Rational moment(const std::vector<int>& exponent) const;
  Rational volume() const { return moment(std::vector<int>(dim_, 0)); }

  // exact boundary moments against the lattice boundary measure d(sigma)
  // (facet measure scaled so a lattice-length-1 edge has mass 1; in dim 1
  // each endpoint has mass 1), for total degree |e| <= 1
  Rational boundary_moment(const std::vector<int>& exponent) const;

  // lattice points of k*P in ascending lexicographic order
  std::vector<std::vector<long>> lattice_points(long k) const;

 private:
  DelzantPolytope() = default;

  int dim_ = 0;
  std::vector<std::vector<long>> normals_;
  std::vector<Rational> offsets_;
  std::vector<std::vector<Rational>> verts_;
};

}  // namespace qel
