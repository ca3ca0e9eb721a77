#include "doctest.h"

#include "lamewave/eig.hpp"
#include "lamewave/error.hpp"
#include "lamewave/fem.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace lamewave;
using std::numbers::pi;

namespace {

SparseMatrix identity(int n) {
  SparseMatrix::Storage s(n, n);
  s.setIdentity();
  return SparseMatrix(s, true);
}

SparseMatrix dirichlet_laplacian(const Mesh& m, const ScalarSystem& s) {
  return apply_dirichlet(s.A, s.dofs.boundary_dofs(m, FacetTag::interface), 1.0);
}

void check_certificates(const SparseMatrix& K, const SparseMatrix& M, const std::vector<EigenPair>& e, double tol,
                        double offset = 0.0) {
  const SpMat k = K.colmajor();
  const SpMat mm = M.colmajor();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const VectorXd& x = e[i].psi_tilde;
    // Certificate on the unconstrained rows.
    VectorXd kx = k * x;
    VectorXd r = kx - (e[i].mu + offset) * (mm * x);
    for (int c : K.constrained()) kx[c] = r[c] = 0.0;
    CHECK(r.norm() <= tol * kx.norm());
    CHECK(e[i].residual <= tol);
    if (i > 0) CHECK(e[i].mu >= e[i - 1].mu);
    for (std::size_t j = 0; j < e.size(); ++j)
      CHECK(std::abs(x.dot(mm * e[j].psi_tilde) - (i == j ? 1.0 : 0.0)) <= 1e-8);
    CHECK((e[i].psi - x / std::sqrt(1.0 + e[i].mu)).norm() <= 1e-14 * x.norm());
  }
}

}  // namespace

TEST_CASE("identity pencil") {
  for (int n : {50, 3000}) {
    const auto e = smallest_eigs(identity(n), identity(n), 4, 1e-10, 1);
    REQUIRE(e.size() == 4);
    for (const auto& p : e) CHECK(p.mu == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("square Dirichlet Laplacian") {
  // k^2 + l^2 on a square of side pi: 2, 5, 5.
  std::vector<double> mu1;
  for (int r = 2; r <= 4; ++r) {
    const Mesh m = generate_structure_mesh(SquareShape{pi}, r);
    const ScalarSystem s = assemble_scalar_laplacian(m, 2);
    const SparseMatrix K = dirichlet_laplacian(m, s);
    EigOptions opt;
    opt.tol = 1e-10;
    opt.dense_threshold = 0;  // exercise the Lanczos path
    const auto e = smallest_eigs(K, s.M, 3, opt);
    check_certificates(K, s.M, e, 1e-10);
    CHECK(e[0].mu == doctest::Approx(2.0).epsilon(1e-2));
    CHECK(e[1].mu == doctest::Approx(5.0).epsilon(1e-2));
    CHECK(e[2].mu == doctest::Approx(5.0).epsilon(1e-2));
    mu1.push_back(e[0].mu);
  }
  // Conforming nested spaces: monotone from above, and Richardson
  // extrapolation (order 4 for quadratic elements) lands on the exact value.
  CHECK(mu1[1] <= mu1[0] + 1e-10);
  CHECK(mu1[2] <= mu1[1] + 1e-10);
  const double extrapolated = mu1[2] + (mu1[2] - mu1[1]) / 15.0;
  CHECK(std::abs(extrapolated - 2.0) < std::abs(mu1[2] - 2.0));
  CHECK(std::abs(extrapolated - 2.0) <= 1e-6);
}

TEST_CASE("dense and Lanczos paths agree") {
  const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, 2);
  const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
  EigOptions dense;
  dense.dense_threshold = 1 << 30;
  EigOptions lanczos;
  lanczos.dense_threshold = 0;
  lanczos.tol = 1e-10;
  const auto a = dirichlet_lame_eigs(m, s, 6, dense);
  const auto b = dirichlet_lame_eigs(m, s, 6, lanczos);
  for (int i = 0; i < 6; ++i) CHECK(a[i].mu == doctest::Approx(b[i].mu).epsilon(1e-9));
}

TEST_CASE("disk Dirichlet-Lame self-convergence") {
  std::vector<double> mu;
  for (int r = 2; r <= 5; ++r) {
    const Mesh m = generate_structure_mesh(DiskShape{1.0}, r);
    const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
    mu.push_back(dirichlet_lame_eigs(m, s, 1)[0].mu);
  }
  // The curved boundary limits the rate to h^2.
  const double x1 = (4.0 * mu[2] - mu[1]) / 3.0;
  const double x2 = (4.0 * mu[3] - mu[2]) / 3.0;
  MESSAGE("extrapolated first disk eigenvalue " << x1 << " / " << x2);
  CHECK(std::abs(x1 - x2) <= 0.01 * std::abs(x2));
}

TEST_CASE("monotone convergence on a box") {
  double prev = 1e300;
  for (int r = 1; r <= 3; ++r) {
    const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, r);
    const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
    const double mu = dirichlet_lame_eigs(m, s, 1)[0].mu;
    CHECK(mu <= prev + 1e-8 * mu);
    prev = mu;
  }
}

TEST_CASE("Neumann eigenvalues") {
  const Mesh sq = generate_structure_mesh(SquareShape{pi}, 3);
  const ScalarSystem s = assemble_scalar_laplacian(sq, 2);
  const auto e = neumann_smallest_eigs(s.A, s.M, 2);
  REQUIRE(e.size() == 2);
  CHECK(e[0].mu == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(e[1].mu == doctest::Approx(1.0).epsilon(1e-3));

  EigOptions lanczos;
  lanczos.dense_threshold = 0;
  const auto l = neumann_smallest_eigs(s.A, s.M, 5, lanczos);
  for (const auto& p : l) CHECK(p.mu > 1e-8);
  CHECK(l[0].mu == doctest::Approx(1.0).epsilon(1e-3));

  // Radial ball mode j0(r1 |y|): its Neumann eigenvalue is r1^2.
  const double r1 = 4.493409457909064;
  const Mesh ball = generate_structure_mesh(BallShape{1.0}, 2);
  const ScalarSystem b = assemble_scalar_laplacian(ball, 2);
  EigOptions near;
  near.target = r1 * r1;
  const auto rb = neumann_smallest_eigs(b.A, b.M, 6, near);
  double best = 1e300;
  for (const auto& p : rb) best = std::min(best, std::abs(p.mu - r1 * r1));
  CHECK(best <= 0.02 * r1 * r1);
  CHECK_THROWS_AS(neumann_smallest_eigs(dirichlet_laplacian(ball, b), b.M, 2), InputError);
}

TEST_CASE("determinism") {
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 2);
  const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
  EigOptions o;
  o.seed = 42;
  const auto a = dirichlet_lame_eigs(m, s, 4, o);
  const auto b = dirichlet_lame_eigs(m, s, 4, o);
  for (int i = 0; i < 4; ++i) {
    CHECK(a[i].mu == b[i].mu);
    CHECK(a[i].psi_tilde == b[i].psi_tilde);
  }
  const auto bd = s.dofs.boundary_dofs(m, FacetTag::interface);
  check_certificates(apply_dirichlet(s.K, bd, 1.0), s.M, a, o.tol, 1.0);
}

TEST_CASE("solver errors") {
  const int n = 2500;
  SparseMatrix::Storage zero(n, n);
  CHECK_THROWS_AS(smallest_eigs(SparseMatrix(zero, true, {0}), identity(n), 2, 1e-8, 1), SolverError);
  CHECK_THROWS_AS(smallest_eigs(identity(4), identity(4), 0, 1e-8, 1), InputError);
  CHECK_THROWS_AS(smallest_eigs(identity(4), identity(5), 1, 1e-8, 1), InputError);

  const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, 2);
  const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
  EigOptions tight;
  tight.dense_threshold = 0;
  tight.max_basis = 8;
  tight.tol = 1e-14;
  try {
    dirichlet_lame_eigs(m, s, 8, tight);
    FAIL("expected a partial result");
  } catch (const PartialResultError& e) {
    CHECK(e.converged() < 8);
  }
}

TEST_CASE("eigenpair dump round-trip") {
  const Mesh m = generate_structure_mesh(BoxShape{1, 1, 1}, 1);
  const LameSystem s = assemble_lame(m, MaterialParams{}, 2);
  EigOptions o;
  const auto e = dirichlet_lame_eigs(m, s, 3, o);
  std::stringstream ss;
  write_eigenpairs(ss, e, o);
  const auto back = read_eigenpairs(ss);
  REQUIRE(back.size() == e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(back[i].mu == e[i].mu);
    CHECK(back[i].psi_tilde == e[i].psi_tilde);
  }
  for (const std::string& text : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)})
    CHECK(base64_decode(base64_encode(text)) == text);
}
