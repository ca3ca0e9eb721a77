#pragma once

#include "lamewave/eig.hpp"
#include "lamewave/fem.hpp"

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace lamewave {

// Interface load f_b = int_{interface} n . v_b, so that K_xi = f^T xi.
VectorXd interface_normal_load(const Mesh& mesh, const DofMap& dofs);

// Kernel field: (L(phi), D(v)) + (phi, v) = int n . v for all v (shifted
// form), or, without the shift, the affine field phi(y) = y / (lambda0 + d lambda1)
// whose stress is the identity.
struct KernelField {
  VectorXd phi;
  VectorXd normal_load;  // f
  double k_phi = 0.0;        // int phi . n
  double h1_norm_sq = 0.0;   // (phi, phi)_H1
  double residual = 0.0;     // ||K phi - f|| / ||f||
  bool affine = false;
};

KernelField solve_kernel(const Mesh& mesh, const LameSystem& sys);
KernelField solve_kernel(const Mesh& mesh, const MaterialParams& params, int order = 2);

// K_xi = int xi . n on the interface.
double k_functional(const KernelField& kernel, const VectorXd& xi);
// kappa0 = K_xi / K_phi, so that K_{xi - kappa0 phi} = 0.
double kappa0(const VectorXd& xi, const KernelField& kernel);

struct WaveCoeffs {
  std::vector<int> k;  // 1-based indices into the basis
  std::vector<double> mu;
  std::vector<double> omega;  // sqrt(1 + mu)
  std::vector<double> xi_h;   // (xi, psi_k)_H1
  std::vector<double> zeta_l;  // (zeta, psi~_k)_L2

  std::size_t size() const { return k.size(); }
  double energy() const;  // sum of xi_h^2 + zeta_l^2
};

struct Projection {
  WaveCoeffs w;
  VectorXd xi_e;
  VectorXd zeta_e;
  std::optional<double> k_xi;  // K_xi of the input, when a kernel is supplied
  bool k_xi_warning = false;   // |K_xi| not negligible: kappa0 phi was not removed
};

// Splits (xi, zeta) into the span of the basis modes listed in `indices`
// (1-based) and the complement. The basis must be L2-orthonormal; H1 inner
// products use the shifted form.
Projection project(const LameSystem& sys, const VectorXd& xi, const VectorXd& zeta, const std::vector<EigenPair>& basis,
                   const std::vector<int>& indices, const KernelField* kernel = nullptr);

// Mixed displacement kappa phi + e + a psi for simulations and tests: e is a
// fixed smooth polynomial field with the phi- and psi-components removed
// (K_e = 0, (e, psi)_H1 = 0), scaled to unit H1 norm.
struct MixedDisplacement {
  VectorXd xi;
  VectorXd e_part;
};
MixedDisplacement mixed_displacement(const LameSystem& sys, const KernelField& kernel, const EigenPair& w,
                                     double kappa, double e_amplitude, double w_amplitude);

WaveCoeffs evolve_wave(const WaveCoeffs& coeffs, double t);

// eta(t) = sum xi_k^H(t) psi_k, eta'(t) = sum zeta_k^L(t) psi~_k.
std::pair<VectorXd, VectorXd> synthesize_wave(const WaveCoeffs& coeffs, const std::vector<EigenPair>& basis, double t);

// CSV rows: k,mu,omega,xi_h,zeta_l.
void write_wave_coeffs(std::ostream& out, const WaveCoeffs& c);
WaveCoeffs read_wave_coeffs(std::istream& in);

}  // namespace lamewave
