#include "lamewave/bridge.hpp"

#include "lamewave/classify.hpp"
#include "lamewave/error.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <numbers>

namespace lamewave {

namespace {

// Mass matrices are well conditioned: Jacobi-preconditioned CG to round-off.
VectorXd mass_solve(const SpMat& m, const VectorXd& b) {
  if (b.isZero(0.0)) return VectorXd::Zero(b.size());
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(1e-14);
  cg.setMaxIterations(2000);
  cg.compute(m);
  VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success && cg.error() > 1e-10) throw SolverError("mass solve did not converge");
  return x;
}

double norm_m(const SparseMatrix& m, const VectorXd& x) { return std::sqrt(std::max(0.0, x.dot(m * x))); }

// ||r||_{N^-1} / ||x||_N for an SPD N.
double dual_residual(const SpMat& n, const VectorXd& r, const VectorXd& x) {
  const double xn = std::sqrt(std::max(0.0, x.dot(n * x)));
  if (xn == 0.0) return 0.0;
  SparseFactor f(n, SparseFactor::Kind::spd);
  return std::sqrt(std::max(0.0, r.dot(f.solve(r)))) / xn;
}

struct VectorSystem {
  LameSystem sys;
  double lambda;
  double offset;  // mass multiple included in K
};

VectorSystem vector_system(const Mesh& mesh, const MaterialParams& params, int order, BridgeOperator op) {
  if (op == BridgeOperator::lame) {
    params.validate();
    return {assemble_lame(mesh, params, order), params.lambda(), params.shift ? 1.0 : 0.0};
  }
  return {assemble_vector_laplacian(mesh, order, false), 1.0, 0.0};
}

FacetField vector_flux(const Mesh& mesh, const VectorSystem& vs, const VectorXd& x, double mu) {
  return boundary_flux(mesh, vs.sys.dofs, vs.sys.K, vs.sys.M, x, mu + vs.offset);
}

BridgeResult div_impl(const Mesh& mesh, const VectorSystem& vs, const VectorXd& psi, double mu, double q,
                      int order) {
  if (psi.size() != vs.sys.dofs.num_dofs()) throw InputError("div_map: field size mismatch");
  const ScalarSystem s = assemble_scalar_laplacian(mesh, order);
  BridgeResult r;
  r.scalar_output = true;
  r.lambda = vs.lambda;
  r.mu_in = mu;
  r.constant_in = q;
  r.mu_out = mu / vs.lambda;
  r.constant_out = q / vs.lambda;

  const SparseMatrix B = assemble_divergence(mesh, s.dofs, vs.sys.dofs);
  r.field = mass_solve(s.M.colmajor(), B * psi);
  // |div psi| <= sqrt(d) |grad psi|: compare against the gradient seminorm
  // (the elastic energy vanishes on rigid rotations).
  const int dim = vs.sys.dofs.components();
  double grad_sq = 0.0;
  for (int c = 0; c < dim; ++c) {
    const VectorXd pc = Eigen::Map<const VectorXd, 0, Eigen::InnerStride<>>(psi.data() + c, s.dofs.num_dofs(),
                                                                            Eigen::InnerStride<>(dim));
    grad_sq += pc.dot(s.A * pc);
  }
  const double vn = norm_m(s.M, r.field);
  if (psi.isZero(0.0) || vn <= 1e-8 * std::sqrt(std::max(0.0, grad_sq))) {
    r.degenerate = true;
    r.field.setZero();
    return r;
  }
  const VectorXd res = s.A * r.field - r.mu_out * (s.M * r.field);
  r.pde_residual = dual_residual(SpMat(s.A.colmajor() + s.M.colmajor()), res, r.field);
  const FacetField trace = facet_trace(mesh, s.dofs, r.field);
  const TractionFit fit = fit_constant_trace(trace, mesh);
  r.trace_variance = fit.rho;
  r.trace_mean = fit.q;
  const double tn = std::sqrt(facet_inner(mesh, trace, trace));
  if (tn > 0.0 && r.mu_out > 0.0) {
    const FacetField flux = scalar_boundary_flux(mesh, s, r.field, r.mu_out);
    r.neumann_residual = std::sqrt(facet_inner(mesh, flux, flux)) / (std::sqrt(r.mu_out) * tn);
  }
  return r;
}

BridgeResult grad_impl(const Mesh& mesh, const VectorSystem& vs, const VectorXd& u, double mu_s, double c,
                       int order) {
  const ScalarSystem s = assemble_scalar_laplacian(mesh, order);
  if (u.size() != s.dofs.num_dofs()) throw InputError("grad_map: field size mismatch");
  const DofMap& vd = vs.sys.dofs;
  BridgeResult r;
  r.scalar_output = false;
  r.lambda = vs.lambda;
  r.mu_in = mu_s;
  r.constant_in = c;
  r.mu_out = vs.lambda * mu_s;
  r.constant_out = -vs.lambda * mu_s * c;
  r.field = VectorXd::Zero(vd.num_dofs());

  const VectorXd ones = VectorXd::Ones(u.size());
  const double volume = ones.dot(s.M * ones);
  const double mean = ones.dot(s.M * u) / volume;
  const VectorXd dev = u - VectorXd::Constant(u.size(), mean);
  if (u.isZero(0.0) || norm_m(s.M, dev) <= 1e-12 * norm_m(s.M, u)) {
    r.degenerate = true;
    return r;
  }
  const SparseMatrix G = assemble_gradient(mesh, vd, s.dofs);
  const VectorXd rhs = G * u;
  const SpMat mv = vs.sys.M.colmajor();

  r.field = mass_solve(mv, rhs);
  const FacetField ft = facet_trace(mesh, vd, r.field);
  const FacetField one = facet_trace(mesh, s.dofs, ones);
  const double area = facet_inner(mesh, one, one);
  const double fn = norm_m(vs.sys.M, r.field);
  r.trace_norm = fn > 0.0 ? std::sqrt(facet_inner(mesh, ft, ft)) / (std::sqrt(area / volume) * fn) : 0.0;

  // Traction and residual of V with the Dirichlet condition imposed.
  const std::vector<int> bd = vd.boundary_dofs(mesh, FacetTag::interface);
  const std::vector<int> in = complement(vd.num_dofs(), bd);
  VectorXd v0 = VectorXd::Zero(vd.num_dofs());
  scatter(v0, in, gather(r.field, in));
  const FacetField t = vector_flux(mesh, vs, v0, r.mu_out);
  const TractionFit fit = fit_normal_traction(t, mesh);
  r.traction_rho = fit.rho;
  r.traction_q = fit.q;

  const VectorXd res = vs.sys.K * v0 - (r.mu_out + vs.offset) * (vs.sys.M * v0);
  const SpMat n = submatrix(SpMat(vs.sys.K.colmajor() + (1.0 - vs.offset) * mv), in, in);
  r.pde_residual = dual_residual(n, gather(res, in), gather(v0, in));
  return r;
}

double angle_deg(double cosine) {
  return std::acos(std::clamp(cosine, 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

nlohmann::json BridgeResult::to_json() const {
  nlohmann::json j;
  j["output"] = scalar_output ? "scalar" : "vector";
  j["lambda"] = lambda;
  j["mu_in"] = mu_in;
  j["mu_out"] = mu_out;
  j["constant_in"] = constant_in;
  j["constant_out"] = constant_out;
  j["degenerate"] = degenerate;
  j["pde_residual"] = pde_residual;
  if (scalar_output) {
    j["neumann_residual"] = neumann_residual;
    j["trace_variance"] = trace_variance;
    j["trace_mean"] = trace_mean;
  } else {
    j["trace_norm"] = trace_norm;
    j["traction_rho"] = traction_rho;
    j["traction_q"] = traction_q;
  }
  j["size"] = field.size();
  return j;
}

nlohmann::json RoundtripResult::to_json() const {
  return {{"degenerate", degenerate},
          {"pde_residual", pde_residual},
          {"angle_deg", angle_deg},
          {"eigenspace_angle_deg", eigenspace_angle_deg}};
}

BridgeResult div_map(const Mesh& mesh, const MaterialParams& params, const VectorXd& psi, double mu, double q,
                     int order, BridgeOperator op) {
  return div_impl(mesh, vector_system(mesh, params, order, op), psi, mu, q, order);
}

BridgeResult grad_map(const Mesh& mesh, const MaterialParams& params, const VectorXd& u, double mu_s, double c,
                      int order, BridgeOperator op) {
  return grad_impl(mesh, vector_system(mesh, params, order, op), u, mu_s, c, order);
}

BridgeResult wave_div_map(const Mesh& mesh, const VectorXd& psi, double mu, double q, int order) {
  return div_map(mesh, MaterialParams{}, psi, mu, q, order, BridgeOperator::vector_laplacian);
}

BridgeResult wave_grad_map(const Mesh& mesh, const VectorXd& u, double mu_s, double c, int order) {
  return grad_map(mesh, MaterialParams{}, u, mu_s, c, order, BridgeOperator::vector_laplacian);
}

RoundtripResult roundtrip(const Mesh& mesh, const MaterialParams& params, const VectorXd& psi, double mu,
                          const std::vector<VectorXd>& eigenspace, int order, BridgeOperator op) {
  if (!(mu > 0.0)) throw InputError("roundtrip: mu must be positive");
  const VectorSystem vs = vector_system(mesh, params, order, op);
  RoundtripResult out;
  out.xi = VectorXd::Zero(psi.size());
  const BridgeResult d = div_impl(mesh, vs, psi, mu, 0.0, order);
  if (d.degenerate) {
    out.degenerate = true;
    return out;
  }
  const BridgeResult g = grad_impl(mesh, vs, d.field, d.mu_out, 0.0, order);
  if (g.degenerate) {
    out.degenerate = true;
    return out;
  }
  out.xi = -g.field / mu;
  out.pde_residual = g.pde_residual;
  const SparseMatrix& M = vs.sys.M;
  const double nx = norm_m(M, out.xi), np = norm_m(M, psi);
  if (nx > 0.0 && np > 0.0) out.angle_deg = angle_deg(std::abs(psi.dot(M * out.xi)) / (nx * np));
  if (!eigenspace.empty() && nx > 0.0) {
    // Orthonormalize the given basis in the L2 inner product, then project.
    std::vector<VectorXd> basis;
    for (const auto& b : eigenspace) {
      VectorXd v = b;
      for (const auto& e : basis) v -= e.dot(M * v) * e;
      const double n = norm_m(M, v);
      if (n > 1e-12 * norm_m(M, b)) basis.push_back(v / n);
    }
    double p2 = 0.0;
    for (const auto& e : basis) p2 += std::pow(e.dot(M * out.xi), 2);
    out.eigenspace_angle_deg = angle_deg(std::sqrt(p2) / nx);
  }
  return out;
}

}  // namespace lamewave
