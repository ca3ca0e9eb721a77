#include "lamewave/sim.hpp"

#include "lamewave/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <lapacke.h>

#include <algorithm>
#include <array>
#include <bit>
#include <limits>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>

namespace lamewave {

namespace {

SpMat selector_product(const CoupledSystem& sys) {
  // T^T K_S T as a velocity-sized matrix.
  std::vector<Eigen::Triplet<double>> t;
  const SpMat k = sys.K_S.colmajor();
  for (int j = 0; j < k.outerSize(); ++j) {
    for (SpMat::InnerIterator it(k, j); it; ++it) {
      t.emplace_back(sys.solid_to_velocity[it.row()], sys.solid_to_velocity[j], it.value());
    }
  }
  SpMat out(sys.velocity.num_dofs(), sys.velocity.num_dofs());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

VectorXd lift(const CoupledSystem& sys, const VectorXd& solid) {
  VectorXd v = VectorXd::Zero(sys.velocity.num_dofs());
  for (std::size_t k = 0; k < sys.solid_to_velocity.size(); ++k) v[sys.solid_to_velocity[k]] = solid[k];
  return v;
}

VectorXd restrict_solid(const CoupledSystem& sys, const VectorXd& w) {
  VectorXd s(sys.solid_to_velocity.size());
  for (std::size_t k = 0; k < sys.solid_to_velocity.size(); ++k) s[k] = w[sys.solid_to_velocity[k]];
  return s;
}

// [[S, -B^T], [-B, 0]] on the free velocity DOFs.
SpMat saddle(const SpMat& s, const SpMat& b) {
  const int nf = static_cast<int>(s.rows()), np = static_cast<int>(b.rows());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(s.nonZeros() + 2 * b.nonZeros());
  for (int j = 0; j < s.outerSize(); ++j) {
    for (SpMat::InnerIterator it(s, j); it; ++it) t.emplace_back(it.row(), j, it.value());
  }
  for (int j = 0; j < b.outerSize(); ++j) {
    for (SpMat::InnerIterator it(b, j); it; ++it) {
      t.emplace_back(nf + it.row(), j, -it.value());
      t.emplace_back(j, nf + it.row(), -it.value());
    }
  }
  SpMat out(nf + np, nf + np);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace

struct CoupledStepper::Cache {
  SpMat m_ff, a_ff, k_ff, b_f;  // free-DOF blocks (k_ff = T^T K T)
  SpMat m_w, a_w, b_w, tkt;     // full blocks
  std::mutex mutex;
  std::map<double, std::unique_ptr<SparseFactor>> factors;  // keyed by signed dt

  const SparseFactor& factor(double dt) {
    std::lock_guard lock(mutex);
    auto it = factors.find(dt);
    if (it != factors.end()) return *it->second;
    const SpMat s = SpMat((2.0 / dt) * m_ff + a_ff + (0.5 * dt) * k_ff);
    auto f = std::make_unique<SparseFactor>(saddle(s, b_f), SparseFactor::Kind::symmetric);
    return *factors.emplace(dt, std::move(f)).first->second;
  }
};

CoupledStepper::CoupledStepper(const Mesh& mesh, const MaterialParams& params, double dt, StepOptions options)
    : mesh_(mesh), sys_(assemble_coupled(mesh, params)), dt_(dt), options_(options), cache_(std::make_unique<Cache>()) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("time step must be positive");
  if (options.picard_max < 1 || !(options.picard_tol > 0.0)) throw InputError("invalid Picard settings");
  free_ = complement(sys_.velocity.num_dofs(), sys_.outer_dofs);
  const std::vector<int> all_p = complement(sys_.pressure.num_dofs(), {});
  Cache& c = *cache_;
  c.m_w = sys_.M_w.colmajor();
  c.a_w = sys_.A_visc.colmajor();
  c.b_w = sys_.B_div.colmajor();
  c.tkt = selector_product(sys_);
  c.m_ff = submatrix(c.m_w, free_, free_);
  c.a_ff = submatrix(c.a_w, free_, free_);
  c.k_ff = submatrix(c.tkt, free_, free_);
  c.b_f = submatrix(c.b_w, all_p, free_);

  // Fluid mass: global mass minus the solid mass carried by shared DOFs.
  std::vector<Eigen::Triplet<double>> t;
  const SpMat ms = sys_.M_S.colmajor();
  for (int j = 0; j < ms.outerSize(); ++j) {
    for (SpMat::InnerIterator it(ms, j); it; ++it) {
      t.emplace_back(sys_.solid_to_velocity[it.row()], sys_.solid_to_velocity[j], -it.value());
    }
  }
  SpMat sm(c.m_w.rows(), c.m_w.cols());
  sm.setFromTriplets(t.begin(), t.end());
  fluid_mass_ = SparseMatrix(SparseMatrix::Storage(SpMat(c.m_w + sm).pruned(1e-300)), true);
}

CoupledStepper::~CoupledStepper() = default;
CoupledStepper::CoupledStepper(CoupledStepper&&) noexcept = default;

CoupledState CoupledStepper::zero_state() const {
  return {0.0, VectorXd::Zero(sys_.solid.num_dofs()), VectorXd::Zero(sys_.velocity.num_dofs()),
          VectorXd::Zero(sys_.pressure.num_dofs())};
}

CoupledState CoupledStepper::make_state(const VectorXd& xi, const VectorXd& zeta, const VectorXd& w_fluid) const {
  const int ns = sys_.solid.num_dofs(), nw = sys_.velocity.num_dofs();
  if (xi.size() != ns || zeta.size() != ns) throw InputError("solid field size mismatch");
  if (w_fluid.size() != 0 && w_fluid.size() != nw) throw InputError("velocity field size mismatch");
  CoupledState s = zero_state();
  s.xi = xi;
  if (w_fluid.size() != 0) s.w = w_fluid;
  for (int k = 0; k < ns; ++k) s.w[sys_.solid_to_velocity[k]] = zeta[k];
  for (int d : sys_.outer_dofs) s.w[d] = 0.0;
  return s;
}

double CoupledStepper::energy(const CoupledState& s) const {
  return 0.5 * s.w.dot(sys_.M_w * s.w) + 0.5 * s.xi.dot(sys_.K_S * s.xi);
}

double CoupledStepper::fluid_l2(const CoupledState& s) const {
  return std::sqrt(std::max(0.0, s.w.dot(fluid_mass_ * s.w)));
}

double CoupledStepper::divergence_norm(const CoupledState& s) const { return (sys_.B_div * s.w).norm(); }

VectorXd CoupledStepper::solid_velocity(const CoupledState& s) const { return restrict_solid(sys_, s.w); }

CoupledState CoupledStepper::advance(const CoupledState& s, double dt, double* dissipation, double* residual) const {
  const int nf = static_cast<int>(free_.size());
  const int np = sys_.pressure.num_dofs();
  if (s.xi.size() != sys_.solid.num_dofs() || s.w.size() != sys_.velocity.num_dofs()) {
    throw InputError("step: state size mismatch");
  }
  Cache& c = *cache_;
  VectorXd rhs(nf + np);
  const VectorXd r1 = (2.0 / dt) * (c.m_w * s.w) - lift(sys_, sys_.K_S * s.xi);
  rhs.head(nf) = gather(r1, free_);
  rhs.tail(np) = -0.5 * (c.b_w * s.w);

  auto check = [&](const SpMat& a, const VectorXd& x) {
    const double r = (a * x - rhs).norm();
    if (!std::isfinite(r) || r > 1e-6 * std::max(rhs.norm(), 1e-300)) {
      throw SolverError("step: saddle-point solve failed at t = " + std::to_string(s.t) +
                        " (residual " + std::to_string(r / std::max(rhs.norm(), 1e-300)) + ")");
    }
  };

  VectorXd sol;
  if (!options_.convection) {
    sol = c.factor(dt).solve(rhs);
    if (!sol.allFinite()) throw SolverError("step: non-finite solution at t = " + std::to_string(s.t));
  } else {
    const SpMat base = SpMat((2.0 / dt) * c.m_ff + c.a_ff + (0.5 * dt) * c.k_ff);
    VectorXd y = s.w;
    bool converged = false;
    for (int it = 0; it < options_.picard_max; ++it) {
      const SpMat n = submatrix(assemble_convection(mesh_, sys_.velocity, y).colmajor(), free_, free_);
      const SpMat a = saddle(SpMat(base + n), c.b_f);
      SparseFactor f(a, SparseFactor::Kind::general);
      sol = f.solve(rhs);
      check(a, sol);
      VectorXd y_new = VectorXd::Zero(y.size());
      scatter(y_new, free_, sol.head(nf));
      const double change = (y_new - y).norm();
      y = y_new;
      if (change <= options_.picard_tol * std::max(y.norm(), 1e-300)) {
        converged = true;
        break;
      }
    }
    if (!converged) throw SolverError("Picard iteration did not converge at t = " + std::to_string(s.t));
  }

  VectorXd y = VectorXd::Zero(sys_.velocity.num_dofs());
  scatter(y, free_, sol.head(nf));
  CoupledState out;
  out.t = s.t + dt;
  out.w = 2.0 * y - s.w;
  for (int d : sys_.outer_dofs) out.w[d] = 0.0;
  out.xi = s.xi + dt * restrict_solid(sys_, y);
  out.p = sol.tail(np);
  const double d = dt * y.dot(c.a_w * y);
  if (dissipation) *dissipation = d;
  if (residual) *residual = energy(out) - energy(s) + d;
  return out;
}

CoupledState CoupledStepper::step(const CoupledState& s, double* dissipation, double* identity_residual) const {
  return advance(s, dt_, dissipation, identity_residual);
}

CoupledState CoupledStepper::step_back(const CoupledState& s) const {
  if (options_.convection) throw InputError("step_back: not available with convection");
  return advance(s, -dt_, nullptr, nullptr);
}

VectorXd CoupledStepper::project_divergence_free(const VectorXd& w) const {
  const int nf = static_cast<int>(free_.size());
  const int np = sys_.pressure.num_dofs();
  if (w.size() != sys_.velocity.num_dofs()) throw InputError("project: velocity size mismatch");
  const Cache& c = *cache_;
  SparseFactor f(saddle(c.m_ff, c.b_f), SparseFactor::Kind::symmetric);
  VectorXd rhs = VectorXd::Zero(nf + np);
  rhs.head(nf) = gather(VectorXd(c.m_w * w), free_);
  const VectorXd sol = f.solve(rhs);
  VectorXd out = VectorXd::Zero(w.size());
  scatter(out, free_, sol.head(nf));
  return out;
}

double energy(const CoupledStepper& stepper, const CoupledState& s) { return stepper.energy(s); }

CoupledState step(const CoupledStepper& stepper, const CoupledState& s) { return stepper.step(s); }

Trajectory simulate(const CoupledStepper& stepper, const VectorXd& xi0, const VectorXd& xi1, const VectorXd& u0,
                    double T, const SimulationOptions& options) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw InputError("final time must be non-negative");
  if (options.stride < 1) throw InputError("stride must be positive");
  const double dt = stepper.dt();
  const long steps = std::lround(T / dt);
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T)) throw InputError("final time must be a multiple of dt");
  const CoupledSystem& sys = stepper.system();
  if (options.basis) {
    for (int k : options.indices) {
      if (k < 1 || k > static_cast<int>(options.basis->size())) throw InputError("W index out of range");
      if ((*options.basis)[k - 1].psi.size() != sys.solid.num_dofs()) throw InputError("W basis size mismatch");
    }
  }

  Trajectory tr;
  tr.w_indices = options.basis ? options.indices : std::vector<int>{};
  CoupledState s = stepper.make_state(xi0, xi1, u0);
  const double bn = sys.B_div.max_abs() * std::max(s.w.norm(), 1e-300);
  tr.initial_divergence = stepper.divergence_norm(s);
  if (tr.initial_divergence > 1e-12 * bn) {
    s.w = stepper.project_divergence_free(s.w);
    tr.initial_projected = true;
  }

  const VectorXd load = interface_normal_load(stepper.mesh(), sys.solid);
  const SpMat h1 = sys.params.shift ? sys.K_S.colmajor() : SpMat(sys.K_S.colmajor() + sys.M_S.colmajor());
  const double k0 = load.dot(s.xi);
  const double e0 = std::max(stepper.energy(s), 1e-300);
  double accumulated = 0.0;

  auto sample = [&](const CoupledState& st) {
    TrajectorySample x;
    x.t = st.t;
    x.energy = stepper.energy(st);
    x.dissipation = accumulated;
    x.k_xi = load.dot(st.xi);
    x.u_norm = stepper.fluid_l2(st);
    if (options.basis) {
      const VectorXd zeta = restrict_solid(sys, st.w);
      for (int k : options.indices) {
        const EigenPair& e = (*options.basis)[k - 1];
        x.xi_h.push_back(st.xi.dot(h1 * e.psi));
        x.zeta_l.push_back(zeta.dot(sys.M_S * e.psi_tilde));
      }
    }
    tr.samples.push_back(std::move(x));
  };

  sample(s);
  for (long n = 1; n <= steps; ++n) {
    double d = 0.0, r = 0.0;
    const double e_before = stepper.energy(s);
    CoupledState next = stepper.step(s, &d, &r);
    next.t = n * dt;
    accumulated += d;
    tr.max_identity_residual = std::max(tr.max_identity_residual, std::abs(r) / e0);
    tr.max_energy_increase = std::max(tr.max_energy_increase, (stepper.energy(next) - e_before) / e0);
    tr.max_k_drift = std::max(tr.max_k_drift, std::abs(load.dot(next.xi) - k0));
    s = std::move(next);
    if (n % options.stride == 0 || n == steps) sample(s);
  }
  tr.final_state = std::move(s);
  return tr;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  out << "t,E,D,K_xi,u_norm";
  for (int k : tr.w_indices) out << ",xi_h_" << k << ",zeta_l_" << k;
  out << '\n' << std::setprecision(12);
  for (const auto& s : tr.samples) {
    out << s.t << ',' << s.energy << ',' << s.dissipation << ',' << s.k_xi << ',' << s.u_norm;
    for (std::size_t i = 0; i < s.xi_h.size(); ++i) out << ',' << s.xi_h[i] << ',' << s.zeta_l[i];
    out << '\n';
  }
}

SolidStepper::SolidStepper(const Mesh& mesh, const LameSystem& sys, double dt) : dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("time step must be positive");
  interior_ = complement(sys.dofs.num_dofs(), sys.dofs.boundary_dofs(mesh, FacetTag::interface));
  k_ = submatrix(sys.K.colmajor(), interior_, interior_);
  m_ = submatrix(sys.M.colmajor(), interior_, interior_);
  factor_ = std::make_unique<SparseFactor>(SpMat(m_ + (0.25 * dt * dt) * k_), SparseFactor::Kind::spd);
}

SolidStepper::~SolidStepper() = default;

std::pair<VectorXd, VectorXd> SolidStepper::step(const VectorXd& xi, const VectorXd& zeta, bool backward) const {
  if (xi.size() != zeta.size()) throw InputError("solid step: size mismatch");
  const double dt = backward ? -dt_ : dt_;
  const VectorXd x = gather(xi, interior_), z = gather(zeta, interior_);
  const VectorXd kx = k_ * x;
  const VectorXd z1 = factor_->solve(VectorXd(m_ * z - (0.25 * dt * dt) * (k_ * z) - dt * kx));
  const VectorXd x1 = x + 0.5 * dt * (z + z1);
  VectorXd xo = VectorXd::Zero(xi.size()), zo = VectorXd::Zero(xi.size());
  scatter(xo, interior_, x1);
  scatter(zo, interior_, z1);
  return {xo, zo};
}

namespace {

// Node permutation of a map under the reflection y_axis -> -y_axis; empty if
// the node set is not mapped onto itself.
std::vector<int> reflect_nodes(const DofMap& d, int axis) {
  double extent = 0.0;
  for (int a = 0; a < d.num_nodes(); ++a) extent = std::max(extent, d.node_position(a).cwiseAbs().maxCoeff());
  const double h = 1e-9 * std::max(extent, 1e-300);
  auto key = [&](const Point& x) {
    return std::array<long long, 3>{std::llround(x[0] / h), std::llround(x[1] / h), std::llround(x[2] / h)};
  };
  std::map<std::array<long long, 3>, int> index;
  for (int a = 0; a < d.num_nodes(); ++a) index.emplace(key(d.node_position(a)), a);
  std::vector<int> image(d.num_nodes());
  for (int a = 0; a < d.num_nodes(); ++a) {
    Point x = d.node_position(a);
    x[axis] = -x[axis];
    const auto it = index.find(key(x));
    if (it == index.end() || (d.node_position(it->second) - x).norm() > 10.0 * h) return {};
    image[a] = it->second;
  }
  return image;
}

// Signed permutation matrix of a reflection acting on DOFs (rows: image).
SpMat reflection_matrix(const DofMap& d, const std::vector<int>& image, int axis) {
  std::vector<Eigen::Triplet<double>> t;
  for (int a = 0; a < d.num_nodes(); ++a) {
    for (int i = 0; i < d.components(); ++i) {
      const double sign = d.kind() == FieldKind::vector && i == axis ? -1.0 : 1.0;
      t.emplace_back(d.dof(image[a], i), d.dof(a, i), sign);
    }
  }
  SpMat r(d.num_dofs(), d.num_dofs());
  r.setFromTriplets(t.begin(), t.end());
  return r;
}

bool commutes(const SpMat& x, const SpMat& left, const SpMat& right) {
  const SpMat d = SpMat(left * x * SpMat(right.transpose())) - x;
  double dm = 0.0, xm = 0.0;
  for (int j = 0; j < d.outerSize(); ++j) {
    for (SpMat::InnerIterator it(d, j); it; ++it) dm = std::max(dm, std::abs(it.value()));
  }
  for (int j = 0; j < x.outerSize(); ++j) {
    for (SpMat::InnerIterator it(x, j); it; ++it) xm = std::max(xm, std::abs(it.value()));
  }
  return dm <= 1e-10 * std::max(xm, 1e-300);
}

// Orthonormal basis (columns) of the DOF vectors transforming by the
// character `chi` of the reflection group. `rows` lists the DOFs kept (in
// order); orbits outside them are dropped.
SpMat sector_basis(const DofMap& d, const std::vector<std::vector<int>>& images, int chi,
                   const std::vector<int>& rows) {
  const int nr = static_cast<int>(images.size());
  const int ng = 1 << nr;
  std::vector<int> position(d.num_dofs(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) position[rows[k]] = static_cast<int>(k);
  std::vector<char> seen(d.num_dofs(), 0);
  std::vector<Eigen::Triplet<double>> t;
  int col = 0;
  for (int a = 0; a < d.num_nodes(); ++a) {
    for (int i = 0; i < d.components(); ++i) {
      if (seen[d.dof(a, i)]) continue;
      std::map<int, double> v;
      for (int g = 0; g < ng; ++g) {
        int b = a;
        double sign = std::popcount(static_cast<unsigned>(g & chi)) % 2 ? -1.0 : 1.0;
        for (int r = 0; r < nr; ++r) {
          if (!(g >> r & 1)) continue;
          b = images[r][b];
          if (d.kind() == FieldKind::vector && i == r) sign = -sign;
        }
        v[d.dof(b, i)] += sign;
        seen[d.dof(b, i)] = 1;
      }
      double n2 = 0.0;
      for (auto& [dof, x] : v) n2 += x * x;
      if (n2 < 0.5 || position[v.begin()->first] < 0) continue;
      const double n = std::sqrt(n2);
      for (auto& [dof, x] : v) {
        if (x != 0.0) t.emplace_back(position[dof], col, x / n);
      }
      ++col;
    }
  }
  SpMat s(static_cast<int>(rows.size()), col);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

MatrixXd project(const SpMat& left, const SpMat& x, const SpMat& right) {
  return MatrixXd(SpMat(SpMat(left.transpose()) * x * right));
}

}  // namespace

GeneratorPencil generator_pencil(const Mesh& mesh, const MaterialParams& params, int max_dense) {
  const CoupledSystem sys = assemble_coupled(mesh, params);
  const std::vector<int> free = complement(sys.velocity.num_dofs(), sys.outer_dofs);
  const std::vector<int> all_s = complement(sys.solid.num_dofs(), {});
  const std::vector<int> all_p = complement(sys.pressure.num_dofs(), {});
  GeneratorPencil g;
  g.solid_dofs = sys.solid.num_dofs();
  g.velocity_dofs = static_cast<int>(free.size());
  g.pressure_dofs = sys.pressure.num_dofs();

  const SpMat K = sys.K_S.colmajor(), Ms = sys.M_S.colmajor();
  const SpMat Mw = sys.M_w.colmajor(), Aw = sys.A_visc.colmajor(), Bw = sys.B_div.colmajor();
  const SpMat Tw = sys.trace.colmajor();

  // Reflections that map the discrete system onto itself.
  std::vector<std::vector<int>> is, iv, ip;
  for (int axis = 0; axis < mesh.dim(); ++axis) {
    auto s = reflect_nodes(sys.solid, axis), v = reflect_nodes(sys.velocity, axis), p = reflect_nodes(sys.pressure, axis);
    if (s.empty() || v.empty() || p.empty()) break;
    const SpMat rs = reflection_matrix(sys.solid, s, axis), rv = reflection_matrix(sys.velocity, v, axis),
                rp = reflection_matrix(sys.pressure, p, axis);
    if (!commutes(K, rs, rs) || !commutes(Ms, rs, rs) || !commutes(Mw, rv, rv) || !commutes(Aw, rv, rv) ||
        !commutes(Bw, rp, rv) || !commutes(Tw, rs, rv)) {
      break;
    }
    is.push_back(std::move(s));
    iv.push_back(std::move(v));
    ip.push_back(std::move(p));
  }
  g.reflections = static_cast<int>(is.size());

  const SpMat Mf = submatrix(Mw, free, free), Af = submatrix(Aw, free, free);
  const SpMat Bf = submatrix(Bw, all_p, free), Tf = submatrix(Tw, all_s, free);
  int deficit = 0;
  for (int chi = 0; chi < (1 << g.reflections); ++chi) {
    const SpMat Ss = sector_basis(sys.solid, is, chi, all_s);
    const SpMat Sv = sector_basis(sys.velocity, iv, chi, free);
    const SpMat Sp = sector_basis(sys.pressure, ip, chi, all_p);
    const int ns = static_cast<int>(Ss.cols()), nv = static_cast<int>(Sv.cols()), np = static_cast<int>(Sp.cols());
    if (ns + nv - np > max_dense) {
      throw InputError("generator pencil: dense block of " + std::to_string(ns + nv - np) +
                       " unknowns exceeds the limit " + std::to_string(max_dense));
    }
    const MatrixXd B = project(Sp, Bf, Sv);
    int rank = 0;
    MatrixXd Z;
    if (np > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qr(B.transpose());
      qr.setThreshold(1e-10);
      rank = static_cast<int>(qr.rank());
      const MatrixXd Q = qr.householderQ();
      Z = Q.rightCols(nv - rank);
    } else {
      Z = MatrixXd::Identity(nv, nv);
    }
    deficit += np - rank;

    const MatrixXd Mz = Z.transpose() * project(Sv, Mf, Sv) * Z;
    Eigen::LLT<MatrixXd> llt(Mz);
    if (llt.info() != Eigen::Success) throw SolverError("generator pencil: reduced mass not positive definite");
    // W = Z L^-T, so W^T M W = I.
    const MatrixXd W = llt.matrixU().solve<Eigen::OnTheRight>(Z);
    const MatrixXd TW = project(Ss, Tf, Sv) * W;

    GeneratorBlock blk;
    blk.sector = chi;
    blk.solid_dofs = ns;
    blk.reduced_velocity = static_cast<int>(W.cols());
    blk.elastic = project(Ss, K, Ss);
    const int r = blk.reduced_velocity;
    blk.A = MatrixXd::Zero(ns + r, ns + r);
    blk.A.topRightCorner(ns, r) = TW;
    blk.A.bottomLeftCorner(r, ns) = -TW.transpose() * blk.elastic;
    blk.A.bottomRightCorner(r, r) = -W.transpose() * project(Sv, Af, Sv) * W;
    blk.fluid_mass = MatrixXd::Identity(r, r) - TW.transpose() * project(Ss, Ms, Ss) * TW;
    g.scale = std::max(g.scale, blk.A.cwiseAbs().rowwise().sum().maxCoeff());
    g.max_block = std::max(g.max_block, static_cast<int>(blk.A.rows()));
    g.blocks.push_back(std::move(blk));
  }
  g.regular = deficit == 0;
  if (deficit > 1) throw SolverError("generator pencil: singular (divergence rank deficit " + std::to_string(deficit) + ")");
  return g;
}

nlohmann::json GeneratorSpectrum::to_json() const {
  nlohmann::json j;
  j["count"] = eigenvalues.size();
  j["max_real"] = max_real;
  j["scale"] = scale;
  j["window_scale"] = window_scale;
  auto& w = j["window"] = nlohmann::json::array();
  for (const auto& p : window) {
    w.push_back({{"re", p.z.real()}, {"im", p.z.imag()}, {"fluid_fraction", p.fluid_fraction}, {"sector", p.sector}});
  }
  return j;
}

GeneratorSpectrum generator_spectrum(const GeneratorPencil& pencil, double im_lo, double im_hi) {
  if (!(im_lo <= im_hi)) throw InputError("spectrum window: lower bound exceeds upper bound");
  if (pencil.blocks.empty()) throw InputError("spectrum: empty pencil");
  GeneratorSpectrum out;
  out.scale = pencil.scale;
  out.max_real = -std::numeric_limits<double>::infinity();
  for (const auto& blk : pencil.blocks) {
    const int n = static_cast<int>(blk.A.rows());
    if (n == 0) continue;
    MatrixXd a = blk.A;
    std::vector<double> wr(n), wi(n);
    MatrixXd vr(n, n);
    double dummy = 0.0;
    const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'V', n, a.data(), n, wr.data(), wi.data(), &dummy,
                                          1, vr.data(), n);
    if (info != 0) throw SolverError("spectrum: eigenvalue iteration failed (info " + std::to_string(info) + ")");
    const int ns = blk.solid_dofs;
    const Eigen::MatrixXcd kc = blk.elastic.cast<std::complex<double>>();
    const Eigen::MatrixXcd fc = blk.fluid_mass.cast<std::complex<double>>();
    for (int i = 0; i < n; ++i) {
      const std::complex<double> z(wr[i], wi[i]);
      out.eigenvalues.push_back(z);
      out.max_real = std::max(out.max_real, z.real());
      if (z.imag() < im_lo || z.imag() > im_hi) continue;
      // Complex pairs are stored as (re, im) column pairs, the first with wi > 0.
      Eigen::VectorXcd v(n);
      if (wi[i] == 0.0) {
        v = vr.col(i).cast<std::complex<double>>();
      } else if (wi[i] > 0.0) {
        v = vr.col(i).cast<std::complex<double>>() + std::complex<double>(0, 1) * vr.col(i + 1);
      } else {
        v = vr.col(i - 1).cast<std::complex<double>>() - std::complex<double>(0, 1) * vr.col(i);
      }
      const Eigen::VectorXcd xi = v.head(ns), w = v.tail(n - ns);
      const double total = w.squaredNorm() + std::real(xi.dot(kc * xi));
      const double fluid = std::real(w.dot(fc * w));
      out.window.push_back({z, total > 0.0 ? fluid / total : 0.0, blk.sector});
      out.window_scale = std::max(out.window_scale, std::abs(z));
    }
  }
  std::sort(out.window.begin(), out.window.end(),
            [](const SpectralPoint& a, const SpectralPoint& b) { return a.z.imag() < b.z.imag(); });
  return out;
}

}  // namespace lamewave
