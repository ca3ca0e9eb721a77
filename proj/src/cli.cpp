#include "lamewave/cli.hpp"

#include "lamewave/ball.hpp"
#include "lamewave/bridge.hpp"
#include "lamewave/classify.hpp"
#include "lamewave/decomp.hpp"
#include "lamewave/eig.hpp"
#include "lamewave/error.hpp"
#include "lamewave/mesh.hpp"
#include "lamewave/sim.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace lamewave::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum class Kind { real, integer, boolean, text, real_list, optional_real };

struct Param {
  std::string key;
  Kind kind;
  json value;
  std::string help;
};

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"mesh",      "eig",      "classify", "schiffer", "bridge",
                                          "ball",      "decompose", "simulate", "spectrum"};
  return s;
}

std::vector<Param> params_for(const std::string& sub) {
  std::vector<Param> p{
      {"out", Kind::text, "lamewave_out", "output directory"},
      {"threads", Kind::integer, 0, "thread cap (0: hardware; LAMEWAVE_THREADS overrides the default)"},
      {"seed", Kind::integer, 1, "random seed"},
  };
  auto add = [&](std::vector<Param> more) { p.insert(p.end(), more.begin(), more.end()); };
  const bool coupled = sub == "simulate" || sub == "spectrum";
  if (sub != "ball") {
    add({{"shape", Kind::text, "ball", "structure: ball, box, ellipsoid, disk, square"},
         {"r", Kind::real, 1.0, "ball/disk radius"},
         {"a", Kind::real, 1.0, "box/ellipsoid/square first size"},
         {"b", Kind::real, 1.0, "box/ellipsoid second size"},
         {"c", Kind::real, 1.0, "box/ellipsoid third size"},
         {"refine", Kind::integer, coupled ? 1 : 2, "refinement level (cell size ~ 2^-refine)"},
         {"mesh_file", Kind::text, "", "read the mesh from a native mesh file instead"},
         {"outer", Kind::text, coupled ? "ball" : "none", "outer domain: none, ball, box"},
         {"outer_r", Kind::real, 1.5, "outer ball radius"},
         {"outer_a", Kind::real, 4.0, "outer box side"},
         {"layers", Kind::integer, coupled ? 1 : 0, "fluid layers (0: automatic)"},
         {"order", Kind::integer, 2, "finite element order"}});
  }
  add({{"lambda0", Kind::real, 1.0, "first Lame constant"},
       {"lambda1", Kind::real, 1.0, "second Lame constant"},
       {"nu", Kind::real, 1.0, "fluid viscosity"},
       {"shift", Kind::boolean, true, "include the zeroth-order term"}});
  if (sub == "eig" || sub == "classify" || sub == "schiffer" || sub == "bridge" || sub == "decompose" ||
      sub == "simulate") {
    add({{"modes", Kind::integer, 10, "eigenpairs per window"},
         {"tol", Kind::real, 1e-8, "eigensolver relative residual tolerance"},
         {"targets", Kind::real_list, json::array(), "spectral windows (mu values; empty: smallest modes)"}});
  }
  if (sub == "eig") add({{"problem", Kind::text, "lame", "lame (Dirichlet) or neumann (scalar)"}});
  if (sub == "classify" || sub == "schiffer" || sub == "bridge" || sub == "decompose" || sub == "simulate") {
    add({{"tau", Kind::real, 0.1, "witness threshold"},
         {"cluster_tol", Kind::real, 2e-3, "relative eigenvalue clustering tolerance"}});
  }
  if (sub == "classify") add({{"convention", Kind::text, "auto", "ball constant: auto, paper, lambda_sum"}});
  if (sub == "bridge") {
    add({{"direction", Kind::text, "div", "div (Lame witness -> scalar), grad (Schiffer witness -> vector), roundtrip"},
         {"operator", Kind::text, "lame", "lame or vector_laplacian"}});
  }
  if (sub == "ball") {
    add({{"count", Kind::integer, 5, "number of roots"},
         {"radius", Kind::real, 1.0, "ball radius"},
         {"dim", Kind::integer, 3, "3 (ball) or 2 (disk)"}});
  }
  if (sub == "decompose") {
    add({{"field", Kind::text, "mixed", "input displacement: mixed or random"},
         {"kappa", Kind::real, 0.3, "kernel multiple in mixed data"}});
  }
  if (sub == "simulate") {
    add({{"T", Kind::real, 1.0, "final time"},
         {"dt", Kind::real, 0.05, "time step"},
         {"stride", Kind::integer, 1, "sampling stride (steps)"},
         {"vtk_stride", Kind::integer, 0, "VTK snapshot stride (0: none)"},
         {"convection", Kind::boolean, false, "include skew-symmetric convection (Picard)"},
         {"picard_max", Kind::integer, 30, "Picard iteration cap"},
         {"picard_tol", Kind::real, 1e-10, "Picard relative tolerance"},
         {"init", Kind::text, "zero", "initial data: zero, witness, mixed, solenoidal"},
         {"kappa", Kind::real, 0.3, "kernel multiple in mixed data"},
         {"amplitude", Kind::real, 1.0, "amplitude of the initial perturbation"}});
  }
  if (sub == "spectrum") {
    add({{"im_lo", Kind::real, 1.0, "window: lower imaginary bound"},
         {"im_hi", Kind::real, 13.0, "window: upper imaginary bound"},
         {"max_dense", Kind::integer, 5000, "largest dense block"},
         {"rel_threshold", Kind::real, 1e-3, "|Re z| threshold relative to the window scale"}});
  }
  return p;
}

bool is_subcommand(const std::string& s) {
  return std::find(subcommands().begin(), subcommands().end(), s) != subcommands().end();
}

json parse_text(const Param& p, const std::string& text) {
  auto fail = [&]() -> json { throw InputError("--" + p.key + ": invalid value '" + text + "'"); };
  try {
    std::size_t used = 0;
    switch (p.kind) {
      case Kind::real:
      case Kind::optional_real: {
        const double v = std::stod(text, &used);
        return used == text.size() ? json(v) : fail();
      }
      case Kind::integer: {
        const long long v = std::stoll(text, &used);
        return used == text.size() ? json(v) : fail();
      }
      case Kind::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        return fail();
      case Kind::text:
        return text;
      case Kind::real_list: {
        json a = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (item.empty()) continue;
          const double v = std::stod(item, &used);
          if (used != item.size()) return fail();
          a.push_back(v);
        }
        return a;
      }
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  return fail();
}

void check_type(const Param& p, const json& v) {
  bool ok = false;
  switch (p.kind) {
    case Kind::real: ok = v.is_number(); break;
    case Kind::optional_real: ok = v.is_number() || v.is_null(); break;
    case Kind::integer: ok = v.is_number_integer(); break;
    case Kind::boolean: ok = v.is_boolean(); break;
    case Kind::text: ok = v.is_string(); break;
    case Kind::real_list:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
      break;
  }
  if (!ok) throw InputError("config key '" + p.key + "': wrong type");
}

// ---------------------------------------------------------------- helpers

struct Context {
  json config;
  fs::path out_dir;
  std::ostream* out;
  json outputs = json::array();
  json extra = json::object();
  std::optional<std::uint64_t> mesh_hash;

  double real(const char* k) const { return config.at(k).get<double>(); }
  int integer(const char* k) const { return config.at(k).get<int>(); }
  bool boolean(const char* k) const { return config.at(k).get<bool>(); }
  std::string text(const char* k) const { return config.at(k).get<std::string>(); }
  std::vector<double> list(const char* k) const { return config.at(k).get<std::vector<double>>(); }

  std::ofstream open(const std::string& name) {
    std::ofstream f(out_dir / name);
    if (!f) throw ResourceError("cannot write " + (out_dir / name).string());
    outputs.push_back(name);
    return f;
  }
};

MaterialParams material(const Context& c) {
  MaterialParams p;
  p.lambda0 = c.real("lambda0");
  p.lambda1 = c.real("lambda1");
  p.nu = c.real("nu");
  p.shift = c.boolean("shift");
  p.validate();
  return p;
}

StructureShape structure_shape(const Context& c) {
  const std::string s = c.text("shape");
  if (s == "ball") return BallShape{c.real("r")};
  if (s == "box") return BoxShape{c.real("a"), c.real("b"), c.real("c")};
  if (s == "ellipsoid") return EllipsoidShape{c.real("a"), c.real("b"), c.real("c")};
  if (s == "disk") return DiskShape{c.real("r")};
  if (s == "square") return SquareShape{c.real("a")};
  throw InputError("unknown shape '" + s + "'");
}

Mesh build_mesh(Context& c) {
  Mesh mesh = [&] {
    const std::string file = c.text("mesh_file");
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw InputError("cannot open mesh file " + file);
      return read_mesh(in);
    }
    const int refine = c.integer("refine");
    if (refine < 0) throw InputError("refine must be non-negative");
    Mesh s = generate_structure_mesh(structure_shape(c), refine);
    const std::string outer = c.text("outer");
    if (outer == "none") return s;
    const int layers = c.integer("layers");
    if (layers < 0) throw InputError("layers must be non-negative");
    const std::optional<int> nl = layers > 0 ? std::optional<int>(layers) : std::nullopt;
    if (outer == "ball") return generate_coupled_mesh(s, OuterBall{c.real("outer_r")}, refine, nl);
    if (outer == "box") {
      const double a = c.real("outer_a");
      return generate_coupled_mesh(s, OuterBox{a, a, a}, refine, nl);
    }
    throw InputError("unknown outer domain '" + outer + "'");
  }();
  c.mesh_hash = mesh.hash();
  return mesh;
}

Mesh structure_of(const Mesh& m) { return m.has_fluid() ? m.solid_submesh() : m; }

ClassifyOptions classify_options(const Context& c) {
  ClassifyOptions o;
  o.order = c.integer("order");
  o.eig.tol = c.real("tol");
  o.eig.seed = static_cast<std::uint64_t>(c.integer("seed"));
  o.targets = c.list("targets");
  o.cluster_tol = c.real("cluster_tol");
  o.refinement = c.integer("refine");
  return o;
}

void write_json_file(Context& c, const std::string& name, const json& j) {
  auto f = c.open(name);
  f << j.dump(2) << '\n';
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// ------------------------------------------------------------ subcommands

void cmd_mesh(Context& c) {
  const Mesh m = build_mesh(c);
  {
    auto f = c.open("mesh.txt");
    write_mesh(f, m);
  }
  {
    auto f = c.open("mesh.vtk");
    write_vtk(f, m, {});
  }
  json j{{"descriptor", m.descriptor()},
         {"dimension", m.dim()},
         {"vertices", m.num_vertices()},
         {"cells", m.num_cells()},
         {"solid_volume", m.region_volume(Region::solid)},
         {"fluid_volume", m.has_fluid() ? m.region_volume(Region::fluid) : 0.0},
         {"interface_area", m.facet_area(FacetTag::interface)},
         {"max_cell_diameter", m.max_cell_diameter()},
         {"hash", hex(m.hash())}};
  write_json_file(c, "mesh.json", j);
  *c.out << j.dump() << '\n';
}

void cmd_eig(Context& c) {
  const Mesh m = structure_of(build_mesh(c));
  EigOptions eo;
  eo.tol = c.real("tol");
  eo.seed = static_cast<std::uint64_t>(c.integer("seed"));
  const int k = c.integer("modes");
  if (k < 1) throw InputError("modes must be >= 1");
  const auto targets = c.list("targets");
  const std::string problem = c.text("problem");
  std::vector<EigenPair> pairs;
  auto solve = [&](std::optional<double> target) {
    EigOptions o = eo;
    o.target = target;
    if (problem == "lame") {
      const LameSystem sys = assemble_lame(m, material(c), c.integer("order"));
      return dirichlet_lame_eigs(m, sys, k, o);
    }
    if (problem == "neumann") {
      const ScalarSystem sys = assemble_scalar_laplacian(m, c.integer("order"));
      return neumann_smallest_eigs(sys.A, sys.M, k, o);
    }
    throw InputError("unknown eigenproblem '" + problem + "'");
  };
  if (targets.empty()) {
    pairs = solve(std::nullopt);
  } else {
    for (double t : targets) {
      auto p = solve(t);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
  }
  {
    auto f = c.open("eigenvalues.csv");
    f << "k,mu,residual\n" << std::setprecision(17);
    for (std::size_t i = 0; i < pairs.size(); ++i) f << i + 1 << ',' << pairs[i].mu << ',' << pairs[i].residual << '\n';
  }
  {
    auto f = c.open("eigenpairs.json");
    write_eigenpairs(f, pairs, eo);
  }
  json mus = json::array();
  for (const auto& p : pairs) mus.push_back(p.mu);
  *c.out << json{{"problem", problem}, {"count", pairs.size()}, {"mu", mus}}.dump() << '\n';
}

Classification run_classify(Context& c, const Mesh& structure, bool schiffer) {
  const ClassifyOptions o = classify_options(c);
  const int m = c.integer("modes");
  const double tau = c.real("tau");
  return schiffer ? classify_schiffer(structure, m, tau, o) : classify_bad_domain(structure, material(c), m, tau, o);
}

void emit_report(Context& c, ClassificationReport& r) {
  r.domain = c.text("mesh_file").empty() ? describe(structure_shape(c)) : c.text("mesh_file");
  write_json_file(c, "report.json", to_json(r));
  {
    auto f = c.open("report.csv");
    write_report_csv(f, r);
  }
  *c.out << to_json(r).dump() << '\n';
}

void cmd_classify(Context& c, bool schiffer) {
  const Mesh m = structure_of(build_mesh(c));
  Classification cl = run_classify(c, m, schiffer);
  if (!schiffer && !cl.report.witnesses.empty() && c.text("shape") == "ball" && c.text("mesh_file").empty()) {
    const MaterialParams p = material(c);
    const std::string conv = c.text("convention");
    const double mu1 = cl.report.clusters.at(cl.witness_cluster_ids.front()).mu;
    const ConventionCheck chk = resolve_convention(mu1, c.real("r"), p);
    json j{{"mu_detected", chk.mu_detected},
           {"mu_paper", chk.mu_paper},
           {"mu_lambda_sum", chk.mu_lambda_sum},
           {"err_paper", chk.err_paper},
           {"err_lambda_sum", chk.err_lambda_sum}};
    if (conv == "auto") {
      j["selected"] = chk.selected ? json(to_string(*chk.selected)) : json(nullptr);
    } else {
      j["selected"] = to_string(parse_convention(conv));
    }
    cl.report.metadata["convention"] = j;
  }
  emit_report(c, cl.report);
}

void cmd_bridge(Context& c) {
  const Mesh m = structure_of(build_mesh(c));
  const std::string dir = c.text("direction");
  const std::string op_name = c.text("operator");
  BridgeOperator op;
  if (op_name == "lame") {
    op = BridgeOperator::lame;
  } else if (op_name == "vector_laplacian") {
    op = BridgeOperator::vector_laplacian;
  } else {
    throw InputError("unknown operator '" + op_name + "'");
  }
  const MaterialParams p = material(c);
  const int order = c.integer("order");
  json j{{"direction", dir}, {"operator", op_name}};
  if (dir == "div" || dir == "roundtrip") {
    Classification cl = run_classify(c, m, false);
    if (cl.witness_fields.empty()) throw SolverError("bridge: no Lame witness found in the computed window");
    const ClusterRecord& cr = cl.report.clusters.at(cl.witness_cluster_ids.front());
    const VectorXd& psi = cl.witness_fields.front();
    j["witness"] = {{"mu", cr.mu}, {"q", cr.q}, {"rho", cr.rho}};
    if (dir == "div") {
      j["result"] = div_map(m, p, psi, cr.mu, cr.q, order, op).to_json();
    } else {
      std::vector<VectorXd> space;
      for (int k : cr.members) space.push_back(cl.pairs.at(k).psi_tilde);
      j["result"] = roundtrip(m, p, psi, cr.mu, space, order, op).to_json();
    }
  } else if (dir == "grad") {
    Classification cl = run_classify(c, m, true);
    if (cl.witness_fields.empty()) throw SolverError("bridge: no Schiffer witness found in the computed window");
    const ClusterRecord& cr = cl.report.clusters.at(cl.witness_cluster_ids.front());
    j["witness"] = {{"mu_s", cr.mu}, {"c", cr.q}, {"rho", cr.rho}};
    j["result"] = grad_map(m, p, cl.witness_fields.front(), cr.mu, cr.q, order, op).to_json();
  } else {
    throw InputError("unknown direction '" + dir + "'");
  }
  write_json_file(c, "bridge.json", j);
  *c.out << j.dump() << '\n';
}

void cmd_ball(Context& c) {
  const int count = c.integer("count");
  if (count < 1) throw InputError("count must be >= 1");
  const double radius = c.real("radius");
  const MaterialParams p = material(c);
  std::ostringstream s;
  s << std::setprecision(17);
  if (c.integer("dim") == 3) {
    s << "k,root,mu_paper,mu_lambda_sum,q_paper,q_lambda_sum\n";
    for (int k = 1; k <= count; ++k) {
      const BallMode a = ball_mode(k, radius, p, Convention::paper);
      const BallMode b = ball_mode(k, radius, p, Convention::lambda_sum);
      s << k << ',' << a.root << ',' << a.mu << ',' << b.mu << ',' << a.q << ',' << b.q << '\n';
    }
  } else if (c.integer("dim") == 2) {
    s << "k,root,mu_s,mu,c,q\n";
    for (int k = 1; k <= count; ++k) {
      const DiskMode d = disk_mode(k, radius, p);
      s << k << ',' << d.root << ',' << d.mu_s << ',' << d.mu << ',' << d.c << ',' << d.q << '\n';
    }
  } else {
    throw InputError("dim must be 2 or 3");
  }
  auto f = c.open("ball.csv");
  f << s.str();
  *c.out << s.str();
}

VectorXd random_field(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

void cmd_decompose(Context& c) {
  const Mesh m = structure_of(build_mesh(c));
  const MaterialParams p = material(c);
  const LameSystem sys = assemble_lame(m, p, c.integer("order"));
  const KernelField ker = solve_kernel(m, sys);
  Classification cl = run_classify(c, m, false);
  const std::vector<EigenPair> basis = witness_basis(cl, sys.M);
  std::vector<int> idx;
  for (std::size_t i = 0; i < basis.size(); ++i) idx.push_back(static_cast<int>(i) + 1);
  VectorXd xi, zeta = VectorXd::Zero(sys.dofs.num_dofs());
  const std::string field = c.text("field");
  const auto seed = static_cast<std::uint64_t>(c.integer("seed"));
  if (field == "random") {
    xi = random_field(sys.dofs.num_dofs(), seed);
    zeta = random_field(sys.dofs.num_dofs(), seed + 1);
    for (int d : sys.K.constrained()) zeta[d] = 0.0;
  } else if (field == "mixed") {
    if (basis.empty()) throw SolverError("decompose: no witness found for mixed data");
    xi = mixed_displacement(sys, ker, basis.front(), c.real("kappa"), 1.0, 1.0).xi;
  } else {
    throw InputError("unknown field '" + field + "'");
  }
  const Projection pr = project(sys, xi, zeta, basis, idx, &ker);
  {
    auto f = c.open("wave.csv");
    write_wave_coeffs(f, pr.w);
  }
  json j{{"k_phi", ker.k_phi},
         {"h1_norm_sq_phi", ker.h1_norm_sq},
         {"kernel_residual", ker.residual},
         {"kappa0", kappa0(xi, ker)},
         {"k_xi", pr.k_xi.value_or(0.0)},
         {"k_xi_warning", pr.k_xi_warning},
         {"witnesses", basis.size()},
         {"wave_energy", pr.w.energy()}};
  write_json_file(c, "decompose.json", j);
  *c.out << j.dump() << '\n';
}

void cmd_simulate(Context& c) {
  const Mesh m = build_mesh(c);
  if (!m.has_fluid()) throw InputError("simulate: a coupled mesh is required (set outer)");
  const MaterialParams p = material(c);
  StepOptions so;
  so.convection = c.boolean("convection");
  so.picard_max = c.integer("picard_max");
  so.picard_tol = c.real("picard_tol");
  const double dt = c.real("dt");
  const CoupledStepper stepper(m, p, dt, so);
  const CoupledSystem& sys = stepper.system();
  const int ns = sys.solid.num_dofs();
  VectorXd xi0 = VectorXd::Zero(ns), xi1 = VectorXd::Zero(ns), u0 = VectorXd::Zero(sys.velocity.num_dofs());
  const std::string init = c.text("init");
  const double amp = c.real("amplitude");
  std::vector<EigenPair> basis;
  SimulationOptions opt;
  opt.step = so;
  opt.stride = c.integer("stride");
  if (init == "witness" || init == "mixed") {
    const Mesh st = m.solid_submesh();
    const LameSystem ls = assemble_lame(st, p, 2);
    Classification cl = run_classify(c, st, false);
    basis = witness_basis(cl, ls.M);
    if (basis.empty()) throw SolverError("simulate: no witness found for " + init + " data");
    basis.resize(1);
    opt.basis = &basis;
    opt.indices = {1};
    if (init == "witness") {
      xi0 = amp * basis.front().psi;
    } else {
      const KernelField ker = solve_kernel(st, ls);
      xi0 = mixed_displacement(ls, ker, basis.front(), c.real("kappa"), amp, amp).xi;
      c.extra["kappa0"] = kappa0(xi0, ker);
    }
    c.extra["witness_mu"] = basis.front().mu;
  } else if (init == "solenoidal") {
    double r_in = 0.0;
    for (int v = 0; v < m.num_vertices(); ++v) {
      if (m.vertex_region(v) != Region::fluid) r_in = std::max(r_in, m.vertex(v).norm());
    }
    double r_out = 0.0;
    for (const auto& x : m.vertices()) r_out = std::max(r_out, x.norm());
    u0 = sys.velocity.interpolate_vector([&](const Point& y) {
      const double r = y.norm();
      if (r <= r_in || r >= r_out) return Point(Point::Zero());
      const double g = amp * std::pow((r - r_in) * (r_out - r), 2) / std::pow(0.5 * (r_out - r_in), 4);
      return Point(-g * y[1], g * y[0], 0.0);
    });
  } else if (init != "zero") {
    throw InputError("unknown init '" + init + "'");
  }
  const Trajectory tr = simulate(stepper, xi0, xi1, u0, c.real("T"), opt);
  {
    auto f = c.open("trajectory.csv");
    write_trajectory_csv(f, tr);
  }
  const int vs = c.integer("vtk_stride");
  if (vs > 0) {
    // Snapshots are recomputed deterministically from the same stepper.
    CoupledState s = stepper.make_state(xi0, xi1, u0);
    if (tr.initial_projected) s.w = stepper.project_divergence_free(s.w);
    const long steps = std::lround(c.real("T") / dt);
    for (long n = 0; n <= steps; ++n) {
      if (n % vs == 0) {
        std::ostringstream name;
        name << "snapshot_" << std::setw(6) << std::setfill('0') << n << ".vtk";
        auto f = c.open(name.str());
        write_vtk(f, m, {{"xi", &sys.solid, &s.xi}, {"w", &sys.velocity, &s.w}});
      }
      if (n < steps) {
        const double t = s.t;
        s = stepper.step(s);
        s.t = t + dt;
      }
    }
  }
  const auto& last = tr.samples.back();
  json j{{"samples", tr.samples.size()},
         {"energy_initial", tr.samples.front().energy},
         {"energy_final", last.energy},
         {"dissipation", last.dissipation},
         {"max_identity_residual", tr.max_identity_residual},
         {"max_energy_increase", tr.max_energy_increase},
         {"max_k_drift", tr.max_k_drift},
         {"initial_projected", tr.initial_projected},
         {"initial_divergence", tr.initial_divergence}};
  for (auto& [k, v] : c.extra.items()) j[k] = v;
  write_json_file(c, "simulate.json", j);
  *c.out << j.dump() << '\n';
}

void cmd_spectrum(Context& c) {
  const Mesh m = build_mesh(c);
  if (!m.has_fluid()) throw InputError("spectrum: a coupled mesh is required (set outer)");
  const GeneratorPencil g = generator_pencil(m, material(c), c.integer("max_dense"));
  const GeneratorSpectrum s = generator_spectrum(g, c.real("im_lo"), c.real("im_hi"));
  const double thr = c.real("rel_threshold") * s.window_scale;
  int near_axis = 0;
  for (const auto& w : s.window) near_axis += std::abs(w.z.real()) <= thr;
  {
    auto f = c.open("eigenvalues.csv");
    f << "re,im\n" << std::setprecision(17);
    for (const auto& z : s.eigenvalues) f << z.real() << ',' << z.imag() << '\n';
  }
  json j = s.to_json();
  j["solid_dofs"] = g.solid_dofs;
  j["velocity_dofs"] = g.velocity_dofs;
  j["pressure_dofs"] = g.pressure_dofs;
  j["reflections"] = g.reflections;
  j["max_block"] = g.max_block;
  j["regular"] = g.regular;
  j["threshold"] = thr;
  j["near_axis"] = near_axis;
  j["note"] = "a finite pencil only resolves point spectrum";
  write_json_file(c, "spectrum.json", j);
  json summary = j;
  summary.erase("window");
  *c.out << summary.dump() << '\n';
}

int threads_from_env() {
  if (const char* e = std::getenv("LAMEWAVE_THREADS")) {
    try {
      return std::stoi(e);
    } catch (const std::logic_error&) {
      throw InputError("LAMEWAVE_THREADS must be an integer");
    }
  }
  return 0;
}

int emit_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

}  // namespace

json default_config(const std::string& subcommand) {
  if (!is_subcommand(subcommand)) throw InputError("unknown subcommand '" + subcommand + "'");
  json j = json::object();
  for (const auto& p : params_for(subcommand)) j[p.key] = p.value;
  return j;
}

json resolve_config(const std::string& subcommand, const json& file, const json& flags) {
  if (!is_subcommand(subcommand)) throw InputError("unknown subcommand '" + subcommand + "'");
  const auto params = params_for(subcommand);
  std::map<std::string, const Param*> by_key;
  for (const auto& p : params) by_key[p.key] = &p;
  json j = default_config(subcommand);
  for (const json* src : {&file, &flags}) {
    if (src->is_null()) continue;
    if (!src->is_object()) throw InputError("config must be a JSON object");
    for (const auto& [k, v] : src->items()) {
      const auto it = by_key.find(k);
      if (it == by_key.end()) throw InputError("unknown config key '" + k + "' for " + subcommand);
      check_type(*it->second, v);
      j[k] = v;
    }
  }
  if (j.at("threads").get<int>() < 0) throw InputError("threads must be non-negative");
  return j;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lamewave: elastic structures in viscous fluid"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name, "run " + name);
    subs[name] = sub;
    sub->add_option("--config", config_paths[name], "JSON config file or run manifest");
    for (const auto& p : params_for(name)) {
      static const std::map<Kind, std::string> type_names{{Kind::real, "REAL"},       {Kind::integer, "INT"},
                                                          {Kind::boolean, "BOOL"},    {Kind::text, "TEXT"},
                                                          {Kind::real_list, "LIST"}, {Kind::optional_real, "REAL"}};
      sub->add_option("--" + p.key, values[name][p.key], p.help)
          ->default_str(p.value.dump())
          ->type_name(type_names.at(p.kind));
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    return emit_error(err, "input", e.what(), kValidation);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    CLI::App* sub = subs.at(name);
    json file = nullptr;
    if (!config_paths[name].empty()) {
      std::ifstream in(config_paths[name]);
      if (!in) throw InputError("cannot open config " + config_paths[name]);
      try {
        file = json::parse(in);
      } catch (const json::parse_error& e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
      }
      // A run manifest carries the resolved config of its run.
      if (file.is_object() && file.contains("tool") && file.contains("config")) {
        if (file.value("subcommand", "") != name) throw InputError("manifest belongs to another subcommand");
        file = file.at("config");
      }
    }
    json flags = json::object();
    for (const auto& p : params_for(name)) {
      if (sub->count("--" + p.key) > 0) flags[p.key] = parse_text(p, values[name][p.key]);
    }
    json config = resolve_config(name, file, flags);
    if (config.at("threads").get<int>() == 0 && !flags.contains("threads") &&
        !(file.is_object() && file.contains("threads"))) {
      config["threads"] = threads_from_env();
    }
    int threads = config.at("threads").get<int>();
    if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    Eigen::setNbThreads(threads);

    Context c;
    c.config = config;
    c.out = &out;
    c.out_dir = config.at("out").get<std::string>();
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw ResourceError("cannot create output directory " + c.out_dir.string());

    if (name == "mesh") cmd_mesh(c);
    else if (name == "eig") cmd_eig(c);
    else if (name == "classify") cmd_classify(c, false);
    else if (name == "schiffer") cmd_classify(c, true);
    else if (name == "bridge") cmd_bridge(c);
    else if (name == "ball") cmd_ball(c);
    else if (name == "decompose") cmd_decompose(c);
    else if (name == "simulate") cmd_simulate(c);
    else if (name == "spectrum") cmd_spectrum(c);

    json manifest{{"tool", "lamewave"},
                  {"version", "1.0.0"},
                  {"subcommand", name},
                  {"config", config},
                  {"threads_effective", threads},
                  {"outputs", c.outputs}};
    if (c.mesh_hash) manifest["mesh_hash"] = hex(*c.mesh_hash);
    std::ofstream mf(c.out_dir / "manifest.json");
    if (!mf) throw ResourceError("cannot write manifest");
    mf << manifest.dump(2) << '\n';
    return kOk;
  } catch (const SolverError& e) {
    return emit_error(err, e.kind(), e.what(), kSolver);
  } catch (const Error& e) {
    return emit_error(err, e.kind(), e.what(), kValidation);
  } catch (const json::exception& e) {
    return emit_error(err, "input", e.what(), kValidation);
  } catch (const std::bad_alloc&) {
    return emit_error(err, "resource", "out of memory", kSolver);
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace lamewave::cli
