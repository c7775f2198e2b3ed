#include "qel/generator.hpp"

namespace qel {

std::vector<Rational> weights_at_level(const TorusGenerator& g,
                                       const std::vector<std::vector<long>>& alphas,
                                       long k) {
  std::vector<Rational> w;
  w.reserve(alphas.size());
  for (const auto& a : alphas) {
    if (a.size() != g.lambda.size())
      throw InvariantError("weights_at_level: direction/lattice arity mismatch");
    Rational acc = g.shift * k;
    for (size_t j = 0; j < a.size(); ++j) acc += g.lambda[j] * a[j];
    w.push_back(acc);
  }
  return w;
}

std::vector<Rational> centred_weights_at_level(
    const TorusGenerator& g, const std::vector<std::vector<long>>& alphas,
    long k) {
  auto w = weights_at_level(g, alphas, k);
  Rational mean = 0;
  for (const auto& v : w) mean += v;
  mean /= static_cast<long>(w.size());
  for (auto& v : w) v -= mean;
  return w;
}

Eigen::VectorXd twist_diagonal(const TorusGenerator& g,
                               const std::vector<std::vector<long>>& alphas,
                               long k, double scale) {
  auto w = centred_weights_at_level(g, alphas, k);
  Eigen::VectorXd out(static_cast<long>(w.size()));
  for (size_t i = 0; i < w.size(); ++i)
    out(static_cast<long>(i)) = scale * w[i].convert_to<double>();
  return out;
}

Rational weight_sum(const TorusGenerator& g,
                    const std::vector<std::vector<long>>& alphas, long k) {
  Rational acc = 0;
  for (const auto& v : weights_at_level(g, alphas, k)) acc += v;
  return acc;
}

}  // namespace qel
