#pragma once

#include <Eigen/Core>

#include <vector>

namespace lamewave {

// Quadrature on the reference simplex of dimension 1, 2 or 3. Points are
// barycentric coordinates (dim+1 entries); weights sum to 1, so an integral
// over a simplex T is |T| * sum_q w_q f(x_q).
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<Eigen::Vector4d> points;  // first dim+1 entries used
  std::vector<double> weights;
};

// Rule exact for polynomials of total degree <= `degree`. Degrees 0-2 use
// small symmetric rules; higher degrees use collapsed Gauss-Legendre products.
const QuadratureRule& simplex_rule(int dim, int degree);

// n-point Gauss-Legendre rule on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace lamewave
