#pragma once

#include <vector>

#include "qel/polytope.hpp"

namespace qel {

// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
// on the Legendre recurrence; deterministic for a given order.
void gauss_legendre(int order, std::vector<double>& nodes,
                    std::vector<double>& weights);

// Interior quadrature for a Delzant polytope against Lebesgue measure.
// dim 1: a single mapped Gauss-Legendre rule.  dim 2: the x-range is split
// at vertex x-coordinates so each strip has affine slice bounds, then a
// tensor Gauss-Legendre rule is laid on every strip; smooth integrands
// converge spectrally in the order.
struct QuadratureRule {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  size_t size() const { return weights.size(); }
};

QuadratureRule interior_rule(const DelzantPolytope& P, int order);

}  // namespace qel
