// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers.
// The process exits 0 whatever the verdicts; failures are reported, not hidden.

#include "lamewave/ball.hpp"
#include "lamewave/bridge.hpp"
#include "lamewave/classify.hpp"
#include "lamewave/decomp.hpp"
#include "lamewave/sim.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

using namespace lamewave;
using nlohmann::json;
using std::numbers::pi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

VectorXd random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = u(rng);
  return x;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// int xi . n through the interface trace and the facet mass.
double direct_flux(const Mesh& m, const DofMap& d, const VectorXd& xi) {
  const FacetField t = facet_trace(m, d, xi);
  return facet_inner(m, t, facet_normals(m, t));
}

struct Outcome {
  bool pass = false;
  std::ostringstream detail;
};

json summary = json::array();

void report(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  const double t = seconds_since(t0);
  std::printf("%s C%d %s:%s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.str().c_str(), t);
  std::fflush(stdout);
  summary.push_back({{"criterion", id}, {"title", title}, {"pass", o.pass}, {"detail", o.detail.str()}, {"seconds", t}});
}

// ------------------------------------------------------------------ ball runs

const MaterialParams kDefault{};

struct BallRun {
  int refinement;
  Mesh mesh;
  LameSystem sys;
  Classification lame;
  double seconds = 0.0;
};

// Spectral windows at the first two closed-form candidates. Twenty modes per
// window: the discrete second radial mode lies about twenty modes away from
// its closed-form value at refinement 3.
constexpr int kBallModes = 20;

std::vector<double> ball_targets() {
  const auto r = bessel_roots(2);
  const double c = kDefault.lambda0 + kDefault.lambda1;
  return {c * r[0] * r[0], c * r[1] * r[1]};
}

const BallRun& ball_run(int refinement) {
  static std::map<int, std::unique_ptr<BallRun>> cache;
  auto& slot = cache[refinement];
  if (!slot) {
    const auto t0 = Clock::now();
    Mesh m = generate_structure_mesh(BallShape{1.0}, refinement);
    LameSystem s = assemble_lame(m, kDefault, 2);
    ClassifyOptions o;
    o.targets = ball_targets();
    o.refinement = refinement;
    Classification c = classify_bad_domain(m, kDefault, kBallModes, 0.1, o);
    slot.reset(new BallRun{refinement, std::move(m), std::move(s), std::move(c), 0.0});
    slot->seconds = seconds_since(t0);
  }
  return *slot;
}

// ------------------------------------------------------------------ criteria

void criterion1(Outcome& o) {
  const BallRun& a = ball_run(2);
  const BallRun& b = ball_run(3);
  const auto& ra = a.lame.report;
  const auto& rb = b.lame.report;
  o.detail << " ref2 " << to_string(ra.verdict) << " witnesses " << ra.witnesses.size() << " in "
           << ra.witness_clusters << " clusters (" << a.seconds << " s); ref3 " << to_string(rb.verdict)
           << " witnesses " << rb.witnesses.size() << " in " << rb.witness_clusters << " clusters (" << b.seconds
           << " s);";
  bool ok = ra.witnesses.size() >= 2 && rb.witnesses.size() >= 2;
  // Each witness cluster of the finer run is tracked to the coarser run: the
  // coarse mode with the smallest rho within 5% in mu (discrete eigenvalues
  // move under refinement and nearby modes mix). rho must strictly decrease.
  if (b.lame.witness_cluster_ids.empty()) ok = false;
  for (int id : b.lame.witness_cluster_ids) {
    const ClusterRecord& f = rb.clusters.at(id);
    const ModeRecord* c = nullptr;
    for (const ModeRecord& mr : ra.modes)
      if (std::abs(mr.mu - f.mu) <= 0.05 * f.mu && (!c || mr.rho < c->rho)) c = &mr;
    if (!c) {
      o.detail << " mu " << f.mu << ": no ref2 mode within 5%;";
      ok = false;
      continue;
    }
    o.detail << " mu " << f.mu << " (ref2 " << c->mu << "): rho " << c->rho << " -> " << f.rho << ";";
    ok = ok && f.rho < c->rho;
  }
  // Convention from the lowest witness of the finest run.
  if (rb.witnesses.empty()) {
    o.detail << " no witness for the convention check";
    ok = false;
  } else {
    double mu1 = 1e300;
    for (int id : b.lame.witness_cluster_ids) mu1 = std::min(mu1, rb.clusters.at(id).mu);
    const ConventionCheck cc = resolve_convention(mu1, 1.0, kDefault);
    o.detail << " mu1 " << mu1 << " vs (2l0+l1) r1^2 " << cc.mu_paper << " (" << 100 * cc.err_paper
             << "%), (l0+l1) r1^2 " << cc.mu_lambda_sum << " (" << 100 * cc.err_lambda_sum << "%) -> "
             << (cc.selected ? to_string(*cc.selected) : std::string("none"));
    ok = ok && cc.selected.has_value();
  }
  o.pass = ok;
}

void criterion2(Outcome& o) {
  bool ok = true;
  const std::vector<std::pair<std::string, StructureShape>> shapes = {{"box", BoxShape{1, 1, 1}},
                                                                      {"ellipsoid", EllipsoidShape{1, 1.3, 0.8}}};
  for (const auto& [name, shape] : shapes) {
    for (int r : {2, 3}) {
      const auto t0 = Clock::now();
      const Mesh m = generate_structure_mesh(shape, r);
      ClassifyOptions opt;
      opt.refinement = r;
      const Classification c = classify_bad_domain(m, kDefault, 20, 0.1, opt);
      double min_rho = 1e300;
      for (const ModeRecord& mr : c.report.modes) min_rho = std::min(min_rho, mr.rho);
      o.detail << " " << name << " ref" << r << " (" << c.report.num_dofs << " dofs, " << seconds_since(t0)
               << " s): " << c.report.witnesses.size() << " witnesses, min rho " << min_rho << ";";
      ok = ok && c.report.witnesses.empty() && c.report.modes.size() == 20 && min_rho >= 0.1;
    }
  }
  o.pass = ok;
}

void criterion3(Outcome& o) {
  bool ok = true;
  const double lambda = kDefault.lambda();
  // Schiffer witness on the ball.
  const BallRun& b = ball_run(3);
  const double r1 = bessel_roots(1)[0];
  ClassifyOptions so;
  so.targets = {r1 * r1};
  so.refinement = 3;
  const Classification sc = classify_schiffer(b.mesh, 6, 0.1, so);
  o.detail << " schiffer " << to_string(sc.report.verdict);
  ok = ok && sc.report.verdict == Verdict::schiffer;

  // Lame witness -> scalar problem.
  if (b.lame.witness_fields.empty()) {
    o.detail << "; no Lame witness";
    ok = false;
  } else {
    const ClusterRecord& w = b.lame.report.clusters.at(b.lame.witness_cluster_ids.front());
    const BridgeResult d = div_map(b.mesh, kDefault, b.lame.witness_fields.front(), w.mu, w.q);
    const bool rel_ok = rel(d.mu_out, w.mu / lambda) <= 1e-12 && rel(d.constant_out, w.q / lambda) <= 1e-12;
    o.detail << "; div_map: neumann " << d.neumann_residual << ", trace variance " << d.trace_variance << ", pde "
             << d.pde_residual << ", relations " << (rel_ok ? "ok" : "broken");
    ok = ok && !d.degenerate && rel_ok && d.neumann_residual <= 0.1 && d.trace_variance <= 0.1 &&
         d.pde_residual <= 0.1;
  }

  // Schiffer witness -> vector problem.
  if (sc.witness_fields.empty()) {
    ok = false;
  } else {
    const ClusterRecord& w = sc.report.clusters.at(sc.witness_cluster_ids.front());
    const BridgeResult g = grad_map(b.mesh, kDefault, sc.witness_fields.front(), w.mu, w.q);
    const double mu_s = w.mu;
    const bool rel_ok = rel(g.mu_out, lambda * mu_s) <= 1e-12 && rel(g.constant_out, -lambda * mu_s * w.q) <= 1e-12;
    o.detail << "; grad_map: traction rho " << g.traction_rho << ", relations " << (rel_ok ? "ok" : "broken");
    ok = ok && !g.degenerate && rel_ok && g.traction_rho <= 0.1;
  }

  // Round trip at two refinements, from the best-fitting cluster near the
  // first closed-form eigenvalue (a witness when the mesh resolves it).
  std::vector<double> angles;
  for (int r : {2, 3}) {
    const BallRun& run = ball_run(r);
    const double mu1 = ball_targets().front();
    const ClusterRecord* best = nullptr;
    for (const auto& cl : run.lame.report.clusters)
      if (std::abs(cl.mu - mu1) <= 0.05 * mu1 && (!best || cl.rho < best->rho)) best = &cl;
    if (!best) {
      o.detail << "; roundtrip ref" << r << ": no mode near " << mu1;
      ok = false;
      continue;
    }
    VectorXd psi = VectorXd::Zero(run.sys.dofs.num_dofs());
    std::vector<VectorXd> space;
    for (std::size_t j = 0; j < best->members.size(); ++j) {
      psi += best->coefficients[j] * run.lame.pairs.at(best->members[j]).psi_tilde;
      space.push_back(run.lame.pairs.at(best->members[j]).psi_tilde);
    }
    const RoundtripResult rt = roundtrip(run.mesh, kDefault, psi, best->mu, space);
    angles.push_back(rt.angle_deg);
    o.detail << "; roundtrip ref" << r << " (mu " << best->mu << ", rho " << best->rho << ") angle " << rt.angle_deg
             << " deg";
  }
  ok = ok && angles.size() == 2 && angles[1] <= 10.0 && angles[1] < angles[0];
  o.pass = ok;
}

// Coarse ball-in-ball configuration shared by the dynamics and spectrum
// criteria.
struct Coupled {
  MaterialParams p;
  Mesh structure;
  Mesh mesh;
  LameSystem sys;
  std::vector<EigenPair> basis;
  KernelField kernel;

  Coupled() : p(params()), structure(generate_structure_mesh(BallShape{1.0}, 1)),
              mesh(generate_coupled_mesh(structure, OuterBall{1.5}, 1, 1)), sys(assemble_lame(structure, p, 2)),
              kernel(solve_kernel(structure, sys)) {
    ClassifyOptions o;
    o.targets = {ball_mode(1, 1.0, p, Convention::lambda_sum).mu};
    basis = witness_basis(classify_bad_domain(structure, p, 10, 0.3, o), sys.M);
  }
  static MaterialParams params() {
    MaterialParams p;
    p.lambda1 = 0.5;
    return p;
  }
};

const Coupled& coupled() {
  static const Coupled c;
  return c;
}

void criterion4(Outcome& o) {
  const Coupled& c = coupled();
  if (c.basis.empty()) {
    o.detail << " no coarse witness";
    return;
  }
  const EigenPair& w = c.basis.front();
  const double omega = std::sqrt(1.0 + w.mu);
  const double T = 3 * 2 * pi / omega;
  const double kappa = 0.3;
  const MixedDisplacement data = mixed_displacement(c.sys, c.kernel, w, kappa, 1.0, 1.0);
  const VectorXd zero = VectorXd::Zero(data.xi.size());
  const std::vector<EigenPair> basis{w};
  SimulationOptions opt;
  opt.basis = &basis;
  opt.indices = {1};
  const double k0 = kappa0(data.xi, c.kernel);
  o.detail << " witness mu " << w.mu << ", kappa0 " << k0 << ";";

  std::vector<double> err;
  double e_ratio = 0.0, w_dev = 0.0, drift = 0.0, k_init = 0.0;
  for (int n : {20, 40, 80}) {
    const CoupledStepper st(c.mesh, c.p, T / (3 * n));
    const Trajectory tr = simulate(st, data.xi, zero, VectorXd(), T, opt);
    const TrajectorySample& s0 = tr.samples.front();
    WaveCoeffs w0;
    w0.k = {1};
    w0.mu = {w.mu};
    w0.omega = {omega};
    w0.xi_h = {s0.xi_h[0]};
    w0.zeta_l = {s0.zeta_l[0]};
    const double amp = std::hypot(w0.xi_h[0], w0.zeta_l[0]);
    const double w_energy0 = amp * amp;
    double e = 0.0;
    w_dev = 0.0;
    for (const auto& s : tr.samples) {
      const WaveCoeffs ref = evolve_wave(w0, s.t);
      e = std::max(e, std::hypot(s.xi_h[0] - ref.xi_h[0], s.zeta_l[0] - ref.zeta_l[0]) / amp);
      w_dev = std::max(w_dev, std::abs(s.xi_h[0] * s.xi_h[0] + s.zeta_l[0] * s.zeta_l[0] - w_energy0) / w_energy0);
    }
    err.push_back(e);
    // E-part energy: total minus the stationary offset minus the W part.
    auto e_part = [&](const TrajectorySample& s) {
      return s.energy - 0.5 * k0 * k0 * c.kernel.k_phi -
             0.5 * (s.xi_h[0] * s.xi_h[0] + s.zeta_l[0] * s.zeta_l[0]);
    };
    e_ratio = e_part(tr.samples.back()) / e_part(s0);
    drift = tr.max_k_drift;
    k_init = s0.k_xi;
  }
  const bool a = err[2] <= 0.05 && err[0] / err[1] >= 3.0 && err[1] / err[2] >= 3.0;
  const bool b = e_ratio <= 0.8;
  const bool cc = drift <= 1e-8 * (1.0 + std::abs(k_init));
  const bool d = w_dev <= 0.01;
  o.detail << " (a) W errors " << err[0] << " " << err[1] << " " << err[2] << " ratios " << err[0] / err[1] << " "
           << err[1] / err[2] << (a ? " ok" : " FAIL") << "; (b) E-part energy ratio " << e_ratio
           << (b ? " ok" : " FAIL") << "; (c) K drift " << drift << (cc ? " ok" : " FAIL")
           << "; (d) W energy deviation " << w_dev << (d ? " ok" : " FAIL");
  o.pass = a && b && cc && d;
}

void criterion5(Outcome& o) {
  const Coupled& c = coupled();
  bool ok = true;
  const double omega = std::sqrt(1.0 + ball_mode(1, 1.0, c.p, Convention::lambda_sum).mu);
  const GeneratorPencil pen = generator_pencil(c.mesh, c.p);
  const GeneratorSpectrum sp = generator_spectrum(pen, 1.0, 13.0);
  const SpectralPoint* best = nullptr;
  for (const auto& z : sp.window) {
    if (z.fluid_fraction > 0.05 || std::abs(z.z - std::complex<double>(0.0, omega)) > 0.1 * omega) continue;
    if (!best || std::abs(z.z.real()) < std::abs(best->z.real())) best = &z;
  }
  o.detail << " ball: max block " << pen.max_block << ", max Re " << sp.max_real << " (scale " << sp.scale << ")";
  if (best) {
    o.detail << ", witness " << best->z.real() << (best->z.imag() < 0 ? "" : "+") << best->z.imag()
             << "i vs i*" << omega << ", fluid fraction " << best->fluid_fraction;
  } else {
    o.detail << ", no eigenvalue within 10% of i*" << omega;
  }
  ok = ok && best && sp.max_real <= 1e-8 * sp.scale && pen.max_block <= 5000;

  const Mesh box = generate_coupled_mesh(generate_structure_mesh(BoxShape{1, 1, 1}, 2), OuterBall{1.5}, 2, 1);
  const GeneratorPencil bp = generator_pencil(box, c.p);
  const GeneratorSpectrum bs = generator_spectrum(bp, 1.0, 13.0);
  const double threshold = 1e-3 * bs.window_scale;
  double min_re = 1e300;
  for (const auto& z : bs.window) min_re = std::min(min_re, std::abs(z.z.real()));
  o.detail << "; box: max block " << bp.max_block << ", " << bs.window.size() << " eigenvalues in window, min |Re| "
           << min_re << " vs threshold " << threshold << ", max Re " << bs.max_real;
  ok = ok && min_re > threshold && bs.max_real <= 1e-8 * bs.scale && bp.max_block <= 5000;
  o.pass = ok;
}

void criterion6(Outcome& o) {
  const BallRun& b = ball_run(2);
  const KernelField k = solve_kernel(b.mesh, b.sys);
  const double k_phi = direct_flux(b.mesh, b.sys.dofs, k.phi);
  const double h1 = inner_h1(b.sys, k.phi, k.phi);
  const double id = rel(k_phi, h1);
  double worst = 0.0;
  for (unsigned i = 0; i < 20; ++i) {
    const VectorXd xi = random_vector(b.sys.dofs.num_dofs(), 1000 + i);
    const double kx = direct_flux(b.mesh, b.sys.dofs, xi);
    const VectorXd rest = xi - kappa0(xi, k) * k.phi;
    worst = std::max(worst, std::abs(direct_flux(b.mesh, b.sys.dofs, rest)) / (1.0 + std::abs(kx)));
  }
  o.detail << " K_phi " << k_phi << " vs |phi|_H1^2 " << h1 << " (rel " << id << "); max |K(xi - kappa0 phi)| / (1 + |K xi|) "
           << worst << " over 20 random xi";
  o.pass = id <= 1e-6 && worst <= 1e-10;
}

void criterion7(Outcome& o) {
  bool ok = true;
  int checked = 0;
  double worst = 0.0;
  for (int r : {2, 3}) {
    const BallRun& b = ball_run(r);
    const double vol = b.mesh.region_volume(Region::solid);
    std::vector<VectorXd> rigid;
    for (int axis = 0; axis < 3; ++axis) {
      rigid.push_back(b.sys.dofs.interpolate_vector([&](const Point&) { return Point(Point::Unit(axis)); }));
      rigid.push_back(b.sys.dofs.interpolate_vector([&](const Point& y) { return Point(Point::Unit(axis).cross(y)); }));
    }
    std::vector<VectorXd> fields = b.lame.witness_fields;
    for (int k : b.lame.report.witnesses) fields.push_back(b.lame.pairs.at(k - 1).psi_tilde);
    for (const VectorXd& psi : fields) {
      const double bound = std::sqrt(inner_l2(b.sys, psi, psi)) * std::sqrt(vol);
      for (const VectorXd& e : rigid) worst = std::max(worst, std::abs(inner_l2(b.sys, e, psi)) / bound);
      ++checked;
    }
  }
  ok = checked > 0 && worst <= 1e-6;
  o.detail << " " << checked << " witness fields and modes, max |(rigid, psi)| / (|psi| |Omega|^1/2) " << worst;
  o.pass = ok;
}

Point lame_operator_fd(const std::function<Point(const Point&)>& v, const Point& y, const MaterialParams& p, double h) {
  Point out = Point::Zero();
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      Point ej = Point::Zero(), ek = Point::Zero();
      ej[j] = h;
      ek[k] = h;
      const Point d = (v(y + ej + ek) - v(y + ej - ek) - v(y - ej + ek) + v(y - ej - ek)) / (4 * h * h);
      if (j == k) out += 0.5 * p.lambda0 * d;
      out[j] += (0.5 * p.lambda0 + p.lambda1) * d[k];
    }
  return -out;
}

void criterion8(Outcome& o) {
  bool ok = true;
  const Mesh m = generate_structure_mesh(BallShape{1.0}, 1);
  const LameSystem s = assemble_lame(m, kDefault, 2);

  // eig: certificates and determinism.
  EigOptions eo;
  const auto e1 = dirichlet_lame_eigs(m, s, 6, eo);
  const auto e2 = dirichlet_lame_eigs(m, s, 6, eo);
  double cert = 0.0, orth = 0.0;
  bool same = e1.size() == e2.size();
  for (std::size_t i = 0; i < e1.size(); ++i) {
    cert = std::max(cert, e1[i].residual);
    same = same && e1[i].mu == e2[i].mu && e1[i].psi_tilde == e2[i].psi_tilde;
    for (std::size_t j = 0; j < e1.size(); ++j)
      orth = std::max(orth, std::abs(inner_l2(s, e1[i].psi_tilde, e1[j].psi_tilde) - (i == j ? 1.0 : 0.0)));
  }
  const bool eig_ok = e1.size() == 6 && cert <= eo.tol && orth <= 1e-8 && same;
  o.detail << " eig: certificate " << cert << ", orthonormality " << orth << ", deterministic " << same;

  // decomp: idempotence and Pythagoras on random states.
  const KernelField k = solve_kernel(m, s);
  const std::vector<int> idx = {1, 2, 5};
  double comp = 0.0, idem = 0.0, pyth = 0.0;
  for (unsigned i = 0; i < 20; ++i) {
    VectorXd xi = random_vector(s.dofs.num_dofs(), 300 + i);
    const VectorXd zeta = random_vector(s.dofs.num_dofs(), 600 + i);
    xi -= kappa0(xi, k) * k.phi;
    const Projection p = project(s, xi, zeta, e1, idx, &k);
    const auto [wx, wz] = synthesize_wave(p.w, e1, 0.0);
    comp = std::max(comp, (wx + p.xi_e - xi).norm() / xi.norm());
    const Projection q = project(s, wx, wz, e1, idx);
    for (std::size_t j = 0; j < idx.size(); ++j)
      idem = std::max({idem, rel(q.w.xi_h[j], p.w.xi_h[j]), rel(q.w.zeta_l[j], p.w.zeta_l[j])});
    pyth = std::max(pyth, rel(inner_h1(s, wx, wx) + inner_h1(s, p.xi_e, p.xi_e), inner_h1(s, xi, xi)));
  }
  const bool decomp_ok = comp <= 1e-10 && idem <= 1e-10 && pyth <= 1e-8;
  o.detail << "; decomp: complement " << comp << ", idempotence " << idem << ", Pythagoras " << pyth;

  // sim: per-step energy identity and contraction.
  const Coupled& c = coupled();
  const CoupledStepper st(c.mesh, c.p, 0.02);
  const int ns = st.system().solid.num_dofs();
  const VectorXd u0 = st.system().velocity.interpolate_vector([](const Point& y) {
    const double b = std::max(0.0, 2.25 - y.squaredNorm());
    return Point(-b * y.y(), b * y.x(), b * 0.5);
  });
  const Trajectory tr = simulate(st, random_vector(ns, 11), random_vector(ns, 12), u0, 0.4);
  const bool sim_ok = tr.max_identity_residual <= 1e-10 && tr.max_energy_increase <= 1e-12;
  o.detail << "; sim: identity residual " << tr.max_identity_residual << ", max energy increase "
           << tr.max_energy_increase;

  // ball: closed form by finite differences.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const BallMode bm = ball_mode(1, 1.0, kDefault, Convention::lambda_sum);
  const auto psi = [&](const Point& y) { return bm.psi(y); };
  double pde = 0.0, trac = 0.0;
  for (int i = 0; i < 100;) {
    const Point y(u(rng), u(rng), u(rng));
    if (y.norm() > 0.95 || y.norm() < 0.05) continue;
    ++i;
    pde = std::max(pde, (lame_operator_fd(psi, y, kDefault, 1e-5) - bm.mu * bm.psi(y)).norm() / (bm.mu * bm.psi(y).norm()));
  }
  for (int i = 0; i < 20; ++i) {
    const Point n = Point(u(rng), u(rng), u(rng)).normalized();
    Eigen::Matrix3d g;
    for (int j = 0; j < 3; ++j) g.col(j) = (bm.psi(n + 1e-5 * Point::Unit(j)) - bm.psi(n - 1e-5 * Point::Unit(j))) / 2e-5;
    const Eigen::Matrix3d L = kDefault.lambda0 * 0.5 * (g + g.transpose()) +
                              kDefault.lambda1 * g.trace() * Eigen::Matrix3d::Identity();
    trac = std::max(trac, (L * n - bm.q * n).norm() / std::abs(bm.q));
  }
  const bool ball_ok = pde <= 1e-4 && trac <= 1e-6;
  o.detail << "; ball: PDE residual " << pde << ", traction residual " << trac;
  o.pass = ok && eig_ok && decomp_ok && sim_ok && ball_ok;
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  report(1, "ball is bad", criterion1);
  report(2, "box and ellipsoid stay good", criterion2);
  report(3, "Schiffer equivalence", criterion3);
  report(4, "invariance and decomposition in time", criterion4);
  report(5, "generator spectrum", criterion5);
  report(6, "kernel identities", criterion6);
  report(7, "rigid-motion orthogonality", criterion7);
  report(8, "property suites", criterion8);
  int passed = 0;
  for (const auto& s : summary) passed += s["pass"].get<bool>();
  std::printf("%d of %zu criteria passed in %.0f s\n", passed, summary.size(), seconds_since(t0));
  std::ofstream("acceptance.json") << summary.dump(2) << '\n';
  return 0;
}
