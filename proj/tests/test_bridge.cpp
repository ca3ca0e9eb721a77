#include "doctest.h"

#include "lamewave/ball.hpp"
#include "lamewave/bridge.hpp"
#include "lamewave/classify.hpp"
#include "lamewave/error.hpp"

#include <cmath>
#include <random>

using namespace lamewave;

namespace {

MaterialParams params() {
  MaterialParams p;
  p.lambda0 = 1.0;
  p.lambda1 = 0.6;
  return p;
}

VectorXd random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = u(rng);
  return x;
}

// Interpolated closed-form ball mode with the discrete Dirichlet condition.
VectorXd ball_mode_field(const Mesh& m, const LameSystem& s, const BallMode& b) {
  VectorXd psi = s.dofs.interpolate_vector([&](const Point& y) { return b.psi(y); });
  for (int d : s.dofs.boundary_dofs(m, FacetTag::interface)) psi[d] = 0.0;
  return psi;
}

}  // namespace

TEST_CASE("div_map bookkeeping and degeneracy") {
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 1);
  const MaterialParams p = params();
  const LameSystem s = assemble_lame(m, p, 2);
  const BridgeResult z = div_map(m, p, VectorXd::Zero(s.dofs.num_dofs()), 7.3, -1.1);
  CHECK(z.degenerate);
  CHECK(z.field.isZero(0.0));
  CHECK(z.pde_residual == 0.0);
  CHECK(z.neumann_residual == 0.0);
  CHECK(z.trace_variance == 0.0);
  CHECK(z.mu_out == 7.3 / (p.lambda0 + p.lambda1));
  CHECK(z.constant_out == -1.1 / (p.lambda0 + p.lambda1));
  const BridgeResult w = wave_div_map(m, VectorXd::Zero(s.dofs.num_dofs()), 7.3, -1.1);
  CHECK(w.degenerate);
  CHECK(w.mu_out == 7.3);
  CHECK(w.constant_out == -1.1);
}

TEST_CASE("grad_map bookkeeping and degeneracy") {
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 1);
  const MaterialParams p = params();
  const ScalarSystem s = assemble_scalar_laplacian(m, 2);
  const BridgeResult z = grad_map(m, p, VectorXd::Constant(s.dofs.num_dofs(), 3.0), 20.0, 0.4);
  CHECK(z.degenerate);
  CHECK(z.field.isZero(0.0));
  CHECK(z.mu_out == (p.lambda0 + p.lambda1) * 20.0);
  CHECK(z.constant_out == -(p.lambda0 + p.lambda1) * 20.0 * 0.4);
  const BridgeResult w = wave_grad_map(m, VectorXd::Constant(s.dofs.num_dofs(), 3.0), 20.0, 0.4);
  CHECK(w.degenerate);
  CHECK(w.mu_out == 20.0);
  CHECK(w.constant_out == -20.0 * 0.4);
}

TEST_CASE("maps are linear") {
  const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, 1);
  const MaterialParams p = params();
  const LameSystem ls = assemble_lame(m, p, 2);
  const ScalarSystem ss = assemble_scalar_laplacian(m, 2);
  const VectorXd a = random_vector(ls.dofs.num_dofs(), 1), b = random_vector(ls.dofs.num_dofs(), 2);
  const VectorXd va = div_map(m, p, a, 10, 1).field, vb = div_map(m, p, b, 10, 1).field;
  const VectorXd vab = div_map(m, p, 2.0 * a - 0.5 * b, 10, 1).field;
  CHECK((vab - (2.0 * va - 0.5 * vb)).norm() <= 1e-10 * vab.norm());
  const VectorXd u = random_vector(ss.dofs.num_dofs(), 3), v = random_vector(ss.dofs.num_dofs(), 4);
  const VectorXd gu = grad_map(m, p, u, 10, 1).field, gv = grad_map(m, p, v, 10, 1).field;
  const VectorXd guv = grad_map(m, p, 1.5 * u + v, 10, 1).field;
  CHECK((guv - (1.5 * gu + gv)).norm() <= 1e-10 * guv.norm());
}

TEST_CASE("div_map of the ball mode is the radial Neumann mode") {
  const MaterialParams p = params();
  const BallMode b = ball_mode(1, 1.0, p, Convention::lambda_sum);
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 3);
  const LameSystem s = assemble_lame(m, p, 2);
  const BridgeResult r = div_map(m, p, ball_mode_field(m, s, b), b.mu, b.q);
  CHECK(!r.degenerate);
  CHECK(r.trace_variance <= 0.05);
  CHECK(r.mu_out == b.mu / p.lambda());
  // div psi_1 = r1 j0(r1 |y|) for the unit ball.
  const ScalarSystem sc = assemble_scalar_laplacian(m, 2);
  const VectorXd exact = sc.dofs.interpolate([&](const Point& y) { return b.root * std::sph_bessel(0, b.root * y.norm()); });
  const VectorXd diff = r.field - exact;
  CHECK(std::sqrt(diff.dot(sc.M * diff)) <= 0.05 * std::sqrt(exact.dot(sc.M * exact)));
  // Boundary mean matches c = q / lambda up to the mesh error.
  CHECK(r.trace_mean == doctest::Approx(r.constant_out).epsilon(0.1));
}

TEST_CASE("grad_map of the radial Neumann mode is an overdetermined Lame mode") {
  const MaterialParams p = params();
  const double r1 = bessel_roots(1)[0];
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 3);
  const ScalarSystem s = assemble_scalar_laplacian(m, 2);
  const VectorXd u = s.dofs.interpolate([&](const Point& y) { return std::sph_bessel(0, r1 * y.norm()); });
  const double c = std::sph_bessel(0, r1);
  const double mu_s = r1 * r1;
  const BridgeResult g = grad_map(m, p, u, mu_s, c);
  CHECK(!g.degenerate);
  CHECK(g.trace_norm <= 0.05);
  CHECK(g.traction_rho <= 0.1);
  CHECK(g.mu_out == p.lambda() * mu_s);
  CHECK(g.constant_out == -p.lambda() * mu_s * c);
  CHECK(g.traction_q == doctest::Approx(g.constant_out).epsilon(0.1));

  const BridgeResult w = wave_grad_map(m, u, mu_s, c);
  CHECK(w.mu_out == mu_s);
  CHECK(w.traction_q == doctest::Approx(w.constant_out).epsilon(0.1));
  // The projected gradient converges to the witness under refinement.
  const Mesh coarse = generate_structure_mesh(BallShape{1.0}, 2);
  const ScalarSystem sc = assemble_scalar_laplacian(coarse, 2);
  const VectorXd uc = sc.dofs.interpolate([&](const Point& y) { return std::sph_bessel(0, r1 * y.norm()); });
  CHECK(w.traction_rho < wave_grad_map(coarse, uc, mu_s, c).traction_rho);
}

TEST_CASE("vector-Laplacian witness grad j0 has normal flux") {
  const double r1 = bessel_roots(1)[0];
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 3);
  const LameSystem s = assemble_vector_laplacian(m, 2, false);
  // grad j0(r1 |y|) = -r1 j1(r1 |y|) y / |y|.
  VectorXd V = s.dofs.interpolate_vector([&](const Point& y) {
    const double rho = y.norm();
    return rho == 0.0 ? Point(Point::Zero()) : Point(-r1 * std::sph_bessel(1, r1 * rho) / rho * y);
  });
  for (int d : s.dofs.boundary_dofs(m, FacetTag::interface)) V[d] = 0.0;
  const TractionFit f = fit_normal_traction(boundary_flux(m, s.dofs, s.K, s.M, V, r1 * r1), m);
  CHECK(f.rho <= 0.1);
  // (grad V) n = u'' n = -r1^2 j0(r1) n on the boundary.
  CHECK(f.q == doctest::Approx(-r1 * r1 * std::sph_bessel(0, r1)).epsilon(0.1));
}

TEST_CASE("roundtrip") {
  const MaterialParams p = params();
  const BallMode b = ball_mode(1, 1.0, p, Convention::lambda_sum);
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 2);
  const LameSystem s = assemble_lame(m, p, 2);
  const VectorXd psi = ball_mode_field(m, s, b);
  const RoundtripResult r = roundtrip(m, p, psi, b.mu);
  CHECK(!r.degenerate);
  CHECK(r.angle_deg <= 10.0);
  const RoundtripResult r2 = roundtrip(m, p, 2.0 * psi, b.mu);
  CHECK(r2.xi == 2.0 * r.xi);
  CHECK_THROWS_AS(roundtrip(m, p, psi, 0.0), InputError);
  CHECK_THROWS_AS(roundtrip(m, p, psi, -1.0), InputError);

  // A rigid rotation is divergence free: the composition annihilates it.
  Eigen::Matrix3d skew;
  skew << 0, 1, -2, -1, 0, 0.5, 2, -0.5, 0;
  const VectorXd rot = s.dofs.interpolate_vector([&](const Point& y) { return Point(skew * y); });
  CHECK(roundtrip(m, p, rot, b.mu).degenerate);
  CHECK(div_map(m, p, rot, b.mu, 0.0).degenerate);
}

TEST_CASE("JSON output") {
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 1);
  const LameSystem s = assemble_lame(m, params(), 2);
  const BridgeResult r = div_map(m, params(), random_vector(s.dofs.num_dofs(), 9), 5.0, 1.0);
  const nlohmann::json j = r.to_json();
  CHECK(j.contains("degenerate"));
  CHECK(j.dump().find("NaN") == std::string::npos);
}
