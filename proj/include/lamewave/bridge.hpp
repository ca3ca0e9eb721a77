#pragma once

#include "lamewave/fem.hpp"

#include "json.hpp"

#include <vector>

namespace lamewave {

// Which vector operator the overdetermined problem uses: the Lame operator
// (lambda = lambda0 + lambda1, traction L(psi) n) or the componentwise vector
// Laplacian (lambda = 1, traction (grad psi) n).
enum class BridgeOperator { lame, vector_laplacian };

// Output of a map between the vector overdetermined problem and the scalar
// Neumann problem with constant trace. Parameter relations are computed, never
// fitted; residuals are reported, never thresholded.
struct BridgeResult {
  bool scalar_output = true;
  VectorXd field;
  double lambda = 1.0;
  double mu_in = 0.0, mu_out = 0.0;
  double constant_in = 0.0, constant_out = 0.0;  // q -> c or c -> q
  bool degenerate = false;

  // Relative residual of the target eigen-equation in the energy dual norm:
  // ||(A - mu M) x||_{(A+M)^-1} / ||x||_{A+M}.
  double pde_residual = 0.0;
  // Scalar output: ||d_n v|| / (sqrt(mu_S) ||v||) on the interface, the
  // boundary variance ||v - mean|| / ||v|| and the boundary mean.
  double neumann_residual = 0.0;
  double trace_variance = 0.0;
  double trace_mean = 0.0;
  // Vector output: ||V|| on the interface relative to sqrt(area/volume)
  // ||V||_L2, and the traction fit and residual of V with its interface
  // values set to zero.
  double trace_norm = 0.0;
  double traction_rho = 0.0;
  double traction_q = 0.0;

  nlohmann::json to_json() const;
};

// v = L2 projection of div psi onto the scalar space; mu_S = mu / lambda,
// c = q / lambda.
BridgeResult div_map(const Mesh& mesh, const MaterialParams& params, const VectorXd& psi, double mu, double q,
                     int order = 2, BridgeOperator op = BridgeOperator::lame);
// V = L2 projection of grad u onto the vector space; mu = lambda mu_S,
// q = -lambda mu_S c.
BridgeResult grad_map(const Mesh& mesh, const MaterialParams& params, const VectorXd& u, double mu_s, double c,
                      int order = 2, BridgeOperator op = BridgeOperator::lame);

// The same maps with the vector Laplacian (lambda = 1).
BridgeResult wave_div_map(const Mesh& mesh, const VectorXd& psi, double mu, double q, int order = 2);
BridgeResult wave_grad_map(const Mesh& mesh, const VectorXd& u, double mu_s, double c, int order = 2);

// Xi = -(1/mu) grad_map(div_map(psi)).
struct RoundtripResult {
  VectorXd xi;
  bool degenerate = false;
  double pde_residual = 0.0;   // as BridgeResult::pde_residual for (K, M, mu)
  double angle_deg = 90.0;     // between span{psi} and span{Xi}, L2 inner product
  // Angle between Xi and the span of `eigenspace` (when given).
  double eigenspace_angle_deg = 90.0;
  nlohmann::json to_json() const;
};
RoundtripResult roundtrip(const Mesh& mesh, const MaterialParams& params, const VectorXd& psi, double mu,
                          const std::vector<VectorXd>& eigenspace = {}, int order = 2,
                          BridgeOperator op = BridgeOperator::lame);

}  // namespace lamewave
