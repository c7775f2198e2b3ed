#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qel/rational.hpp"

namespace qel {

// Generator of a 1-parameter subgroup of the torus acting on sections: at
// level k it is diagonal in the monomial basis with weight
//   w(alpha) = <lambda, alpha> + k * shift
// at lattice point alpha of k*P.  The centred copy subtracts the mean weight
// so the trace vanishes exactly.
struct TorusGenerator {
  std::vector<Rational> lambda;
  Rational shift = 0;
};

std::vector<Rational> weights_at_level(const TorusGenerator& g,
                                       const std::vector<std::vector<long>>& alphas,
                                       long k);

std::vector<Rational> centred_weights_at_level(
    const TorusGenerator& g, const std::vector<std::vector<long>>& alphas,
    long k);

Rational weight_sum(const TorusGenerator& g,
                    const std::vector<std::vector<long>>& alphas, long k);

// centred weights as a double vector scaled by `scale`: the fixed twist
// A = scale * diag(centred weights)
Eigen::VectorXd twist_diagonal(const TorusGenerator& g,
                               const std::vector<std::vector<long>>& alphas,
                               long k, double scale);

}  // namespace qel
