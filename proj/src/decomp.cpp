#include "lamewave/decomp.hpp"

#include "lamewave/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace lamewave {

VectorXd interface_normal_load(const Mesh& mesh, const DofMap& dofs) {
  if (dofs.kind() != FieldKind::vector) throw InputError("interface_normal_load: vector map required");
  const Eigen::MatrixXd& ref = facet_reference_mass(mesh.dim(), dofs.order());
  const VectorXd row_sums = ref.rowwise().sum();
  VectorXd f = VectorXd::Zero(dofs.num_dofs());
  for (const auto& facet : mesh.facets()) {
    if (facet.tag != FacetTag::interface) continue;
    const auto nodes = dofs.facet_nodes(facet);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (int i = 0; i < mesh.dim(); ++i) f[dofs.dof(nodes[a], i)] += facet.measure * row_sums[a] * facet.normal[i];
    }
  }
  return f;
}

KernelField solve_kernel(const Mesh& mesh, const LameSystem& sys) {
  KernelField k;
  k.normal_load = interface_normal_load(mesh, sys.dofs);
  const SparseMatrix& K = sys.K;
  if (sys.params.shift) {
    SparseFactor f(K.colmajor(), SparseFactor::Kind::spd);
    k.phi = f.solve(k.normal_load);
    k.h1_norm_sq = k.phi.dot(K * k.phi);
  } else {
    const double c = 1.0 / (sys.params.lambda0 + mesh.dim() * sys.params.lambda1);
    k.phi = sys.dofs.interpolate_vector([&](const Point& y) { return Point(c * y); });
    k.affine = true;
    k.h1_norm_sq = k.phi.dot(K * k.phi) + k.phi.dot(sys.M * k.phi);
  }
  // Residual of the weak Neumann problem; for the affine field the load
  // balances the elastic form alone.
  const VectorXd r = K * k.phi - k.normal_load;
  const double fn = k.normal_load.norm();
  k.residual = fn > 0.0 ? r.norm() / fn : r.norm();
  k.k_phi = k.normal_load.dot(k.phi);
  return k;
}

KernelField solve_kernel(const Mesh& mesh, const MaterialParams& params, int order) {
  params.validate();
  return solve_kernel(mesh, assemble_lame(mesh, params, order));
}

double k_functional(const KernelField& kernel, const VectorXd& xi) {
  if (xi.size() != kernel.normal_load.size()) throw InputError("K functional: field size mismatch");
  return kernel.normal_load.dot(xi);
}

double kappa0(const VectorXd& xi, const KernelField& kernel) {
  if (!(kernel.k_phi > 0.0)) throw Error("kernel field has non-positive K_phi");
  return k_functional(kernel, xi) / kernel.k_phi;
}

double WaveCoeffs::energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < size(); ++i) e += xi_h[i] * xi_h[i] + zeta_l[i] * zeta_l[i];
  return e;
}

Projection project(const LameSystem& sys, const VectorXd& xi, const VectorXd& zeta, const std::vector<EigenPair>& basis,
                   const std::vector<int>& indices, const KernelField* kernel) {
  const int n = sys.dofs.num_dofs();
  if (xi.size() != n || zeta.size() != n) throw InputError("project: field size mismatch");
  Projection p;
  p.xi_e = xi;
  p.zeta_e = zeta;
  for (int k : indices) {
    if (k < 1 || k > static_cast<int>(basis.size())) throw InputError("project: index out of range");
    const EigenPair& e = basis[k - 1];
    const double a = inner_h1(sys, xi, e.psi);
    const double b = inner_l2(sys, zeta, e.psi_tilde);
    p.w.k.push_back(k);
    p.w.mu.push_back(e.mu);
    p.w.omega.push_back(std::sqrt(1.0 + e.mu));
    p.w.xi_h.push_back(a);
    p.w.zeta_l.push_back(b);
    p.xi_e -= a * e.psi;
    p.zeta_e -= b * e.psi_tilde;
  }
  if (kernel) {
    p.k_xi = k_functional(*kernel, xi);
    const double scale = std::sqrt(std::max(0.0, inner_h1(sys, xi, xi))) * std::sqrt(std::max(0.0, kernel->k_phi));
    p.k_xi_warning = std::abs(*p.k_xi) > 1e-8 * std::max(scale, 1e-300);
  }
  return p;
}

MixedDisplacement mixed_displacement(const LameSystem& sys, const KernelField& kernel, const EigenPair& w,
                                     double kappa, double e_amplitude, double w_amplitude) {
  const int n = sys.dofs.num_dofs();
  if (kernel.phi.size() != n || w.psi.size() != n) throw InputError("mixed_displacement: field size mismatch");
  const bool planar = sys.dofs.dim() == 2;
  VectorXd e = sys.dofs.interpolate_vector([&](const Point& y) {
    if (planar) return Point(y[0] * y[1] + 0.3 * y[0], y[0] * y[0] - y[1], 0.0);
    return Point(y[1] * y[2] + 0.3 * y[0], y[0] * y[2] + y[2], y[0] * y[0] - y[1]);
  });
  e -= kappa0(e, kernel) * kernel.phi;
  const double pw = inner_h1(sys, w.psi, w.psi);
  if (pw > 0.0) e -= inner_h1(sys, e, w.psi) / pw * w.psi;
  const double en = std::sqrt(std::max(0.0, inner_h1(sys, e, e)));
  if (!(en > 0.0)) throw Error("mixed_displacement: degenerate smooth field");
  MixedDisplacement m;
  m.e_part = (e_amplitude / en) * e;
  m.xi = kappa * kernel.phi + m.e_part + w_amplitude * w.psi;
  return m;
}

WaveCoeffs evolve_wave(const WaveCoeffs& coeffs, double t) {
  WaveCoeffs out = coeffs;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double c = std::cos(coeffs.omega[i] * t), s = std::sin(coeffs.omega[i] * t);
    out.xi_h[i] = c * coeffs.xi_h[i] + s * coeffs.zeta_l[i];
    out.zeta_l[i] = -s * coeffs.xi_h[i] + c * coeffs.zeta_l[i];
  }
  return out;
}

std::pair<VectorXd, VectorXd> synthesize_wave(const WaveCoeffs& coeffs, const std::vector<EigenPair>& basis, double t) {
  if (basis.empty()) throw InputError("synthesize_wave: empty basis");
  const WaveCoeffs c = evolve_wave(coeffs, t);
  VectorXd eta = VectorXd::Zero(basis.front().psi.size());
  VectorXd eta_dot = VectorXd::Zero(eta.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.k[i] < 1 || c.k[i] > static_cast<int>(basis.size())) throw InputError("synthesize_wave: index out of range");
    const EigenPair& e = basis[c.k[i] - 1];
    eta += c.xi_h[i] * e.psi;
    eta_dot += c.zeta_l[i] * e.psi_tilde;
  }
  return {eta, eta_dot};
}

void write_wave_coeffs(std::ostream& out, const WaveCoeffs& c) {
  out << "k,mu,omega,xi_h,zeta_l\n" << std::setprecision(17);
  for (std::size_t i = 0; i < c.size(); ++i) {
    out << c.k[i] << ',' << c.mu[i] << ',' << c.omega[i] << ',' << c.xi_h[i] << ',' << c.zeta_l[i] << '\n';
  }
}

WaveCoeffs read_wave_coeffs(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,mu,omega,xi_h,zeta_l") throw InputError("wave coefficients: bad header");
  WaveCoeffs c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream s(line);
    int k;
    double mu, omega, a, b;
    if (!(s >> k >> mu >> omega >> a >> b)) throw InputError("wave coefficients: bad row '" + line + "'");
    c.k.push_back(k);
    c.mu.push_back(mu);
    c.omega.push_back(omega);
    c.xi_h.push_back(a);
    c.zeta_l.push_back(b);
  }
  return c;
}

}  // namespace lamewave
