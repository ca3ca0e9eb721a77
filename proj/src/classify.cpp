#include "lamewave/classify.hpp"

#include "lamewave/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace lamewave {

namespace {

FacetField ones_like(const FacetField& like) {
  FacetField out = like;
  out.values = Eigen::MatrixXd::Ones(like.values.rows(), 1);
  return out;
}

TractionFit fit_against(const FacetField& t, const FacetField& shape, const Mesh& mesh) {
  TractionFit fit;
  const double tt = facet_inner(mesh, t, t);
  fit.residual = t;
  if (!(tt > 0.0)) {
    fit.degenerate = true;
    return fit;
  }
  const double gg = facet_inner(mesh, shape, shape);
  if (!(gg > 0.0)) throw InputError("traction fit: empty interface");
  fit.q = facet_inner(mesh, t, shape) / gg;
  fit.residual.values = t.values - fit.q * shape.values;
  fit.rho = std::min(1.0, std::sqrt(std::max(0.0, facet_inner(mesh, fit.residual, fit.residual) / tt)));
  return fit;
}

FacetField combine(const std::vector<FacetField>& fields, const Eigen::VectorXd& c) {
  FacetField out = fields.front();
  out.values.setZero();
  for (std::size_t i = 0; i < fields.size(); ++i) out.values += c[i] * fields[i].values;
  return out;
}

void normalize_coefficients(Eigen::VectorXd& c) {
  const double n = c.norm();
  if (n > 0.0) c /= n;
  Eigen::Index imax = 0;
  c.cwiseAbs().maxCoeff(&imax);
  if (c[imax] < 0.0) c = -c;
}

struct Mode {
  EigenPair pair;
  FacetField field;  // traction (Lame) or trace (Schiffer)
};

// Eigenpairs for each requested window, merged, deduplicated and sorted.
template <class Solve>
std::vector<EigenPair> windowed(const std::vector<double>& targets, const SparseMatrix& M, Solve solve) {
  if (targets.empty()) return solve(std::optional<double>());
  std::vector<EigenPair> all;
  for (double t : targets) {
    for (auto& p : solve(std::optional<double>(t))) {
      const bool dup = std::any_of(all.begin(), all.end(), [&](const EigenPair& e) {
        return std::abs(e.mu - p.mu) <= 1e-6 * std::max(1.0, std::abs(p.mu)) &&
               std::abs(e.psi_tilde.dot(M * p.psi_tilde)) > 0.5;
      });
      if (!dup) all.push_back(std::move(p));
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const EigenPair& a, const EigenPair& b) { return a.mu < b.mu; });
  return all;
}

Classification build_report(const Mesh& mesh, std::vector<Mode> modes, bool scalar,
                            double tau, const ClassifyOptions& opt, double zero_trace_bound) {
  Classification out;
  auto& r = out.report;
  r.tau = tau;
  r.cluster_tol = opt.cluster_tol;
  r.targets = opt.targets;
  r.domain = mesh.descriptor();
  r.refinement = opt.refinement;
  r.dimension = mesh.dim();
  r.order = opt.order;

  auto shape_of = [&](const FacetField& f) { return scalar ? ones_like(f) : facet_normals(mesh, f); };

  for (std::size_t i = 0; i < modes.size(); ++i) {
    ModeRecord rec;
    rec.k = static_cast<int>(i) + 1;
    rec.mu = modes[i].pair.mu;
    rec.residual = modes[i].pair.residual;
    const FacetField& f = modes[i].field;
    if (scalar) rec.zero_trace = std::sqrt(facet_inner(mesh, f, f)) <= zero_trace_bound;
    const TractionFit fit = fit_against(f, shape_of(f), mesh);
    rec.rho_single = fit.rho;
    rec.q_single = fit.q;
    r.modes.push_back(rec);
  }

  // Clusters of numerically degenerate eigenvalues.
  for (std::size_t i = 0; i < modes.size();) {
    std::size_t j = i + 1;
    while (j < modes.size() &&
           modes[j].pair.mu - modes[i].pair.mu <= opt.cluster_tol * std::max(1e-300, std::abs(modes[i].pair.mu))) {
      ++j;
    }
    ClusterRecord c;
    double mu_sum = 0.0;
    std::vector<FacetField> fields;
    std::vector<int> used;
    for (std::size_t k = i; k < j; ++k) {
      c.members.push_back(static_cast<int>(k));
      mu_sum += modes[k].pair.mu;
      if (!r.modes[k].zero_trace) {
        fields.push_back(modes[k].field);
        used.push_back(static_cast<int>(k));
      }
    }
    c.mu = mu_sum / static_cast<double>(j - i);
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(j - i);
    if (!fields.empty()) {
      const CombinationFit fit = fit_combination(fields, shape_of(fields.front()), mesh);
      c.rho = fit.rho;
      c.q = fit.q;
      for (std::size_t u = 0; u < used.size(); ++u) coeff[used[u] - static_cast<int>(i)] = fit.coefficients[u];
    } else {
      c.rho = 0.0;  // all members have zero trace; excluded below
    }
    c.coefficients.assign(coeff.data(), coeff.data() + coeff.size());
    const int cid = static_cast<int>(r.clusters.size());
    for (std::size_t k = i; k < j; ++k) {
      r.modes[k].cluster = cid;
      r.modes[k].rho = c.rho;
      r.modes[k].q = c.q;
    }
    const bool witness = c.rho < tau && !fields.empty();
    if (witness) {
      ++r.witness_clusters;
      VectorXd w = VectorXd::Zero(modes[i].pair.psi_tilde.size());
      for (std::size_t k = i; k < j; ++k) w += coeff[k - i] * modes[k].pair.psi_tilde;
      out.witness_fields.push_back(w);
      out.witness_cluster_ids.push_back(static_cast<int>(r.clusters.size()));
    }
    r.clusters.push_back(std::move(c));
    i = j;
  }
  for (const auto& rec : r.modes) {
    if (rec.rho < tau && !rec.zero_trace) r.witnesses.push_back(rec.k);
  }
  const bool found = !r.witnesses.empty();
  r.verdict = scalar ? (found ? Verdict::schiffer : Verdict::non_schiffer_up_to_cutoff)
                     : (found ? Verdict::bad : Verdict::good_up_to_cutoff);
  r.metadata["scope"] = "verdict holds only up to the computed modes and the threshold tau";
  for (auto& m : modes) out.pairs.push_back(std::move(m.pair));
  return out;
}

}  // namespace

TractionFit fit_normal_traction(const FacetField& t, const Mesh& mesh) {
  if (t.values.cols() != mesh.dim()) throw InputError("fit_normal_traction: field must have d components");
  return fit_against(t, facet_normals(mesh, t), mesh);
}

TractionFit fit_constant_trace(const FacetField& trace, const Mesh& mesh) {
  if (trace.values.cols() != 1) throw InputError("fit_constant_trace: field must be scalar");
  return fit_against(trace, ones_like(trace), mesh);
}

CombinationFit fit_combination(const std::vector<FacetField>& fields, const FacetField& shape, const Mesh& mesh) {
  if (fields.empty()) throw InputError("fit_combination: no fields");
  const int k = static_cast<int>(fields.size());
  CombinationFit out;
  if (k == 1) {
    const TractionFit f = fit_against(fields[0], shape, mesh);
    out.coefficients = Eigen::VectorXd::Ones(1);
    out.q = f.q;
    out.rho = f.rho;
    out.degenerate = f.degenerate;
    return out;
  }
  Eigen::MatrixXd G(k, k);
  Eigen::VectorXd g(k);
  for (int i = 0; i < k; ++i) {
    g[i] = facet_inner(mesh, fields[i], shape);
    for (int j = 0; j <= i; ++j) G(i, j) = G(j, i) = facet_inner(mesh, fields[i], fields[j]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmax > 0.0)) {
    out.coefficients = Eigen::VectorXd::Unit(k, 0);
    out.rho = 0.0;
    out.degenerate = true;
    return out;
  }
  // The maximizer of <t,g>^2 / <t,t> over t in the span is G^+ g.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    const double l = es.eigenvalues()[i];
    if (l > 1e-12 * lmax) c += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(g) / l);
  }
  if (c.norm() == 0.0) c = es.eigenvectors().col(k - 1);  // span orthogonal to the shape
  normalize_coefficients(c);
  const TractionFit f = fit_against(combine(fields, c), shape, mesh);
  out.coefficients = c;
  out.q = f.q;
  out.rho = f.rho;
  out.degenerate = f.degenerate;
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::good_up_to_cutoff: return "GOOD_UP_TO_CUTOFF";
    case Verdict::bad: return "BAD";
    case Verdict::non_schiffer_up_to_cutoff: return "NON_SCHIFFER_UP_TO_CUTOFF";
    case Verdict::schiffer: return "SCHIFFER";
  }
  return "";
}

Verdict parse_verdict(const std::string& s) {
  for (Verdict v : {Verdict::good_up_to_cutoff, Verdict::bad, Verdict::non_schiffer_up_to_cutoff, Verdict::schiffer}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown verdict '" + s + "'");
}

Classification classify_bad_domain(const Mesh& mesh, const MaterialParams& params, int m, double tau,
                                   const ClassifyOptions& options) {
  if (m < 1) throw InputError("classify: m must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("classify: tau must lie in (0, 1)");
  params.validate();
  const LameSystem sys = assemble_lame(mesh, params, options.order);
  const auto pairs = windowed(options.targets, sys.M, [&](std::optional<double> target) {
    EigOptions eo = options.eig;
    eo.target = target;
    return dirichlet_lame_eigs(mesh, sys, m, eo);
  });
  std::vector<Mode> modes;
  for (const auto& p : pairs) modes.push_back({p, boundary_traction(mesh, sys, p.psi_tilde, p.mu)});
  Classification out = build_report(mesh, std::move(modes), false, tau, options, 0.0);
  out.report.problem = "lame";
  out.report.params = params;
  out.report.m = m;
  out.report.num_dofs = sys.dofs.num_dofs();
  return out;
}

Classification classify_schiffer(const Mesh& mesh, int m, double tau, const ClassifyOptions& options) {
  if (m < 1) throw InputError("classify_schiffer: m must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("classify_schiffer: tau must lie in (0, 1)");
  const ScalarSystem sys = assemble_scalar_laplacian(mesh, options.order);
  const auto pairs = windowed(options.targets, sys.M, [&](std::optional<double> target) {
    EigOptions eo = options.eig;
    eo.target = target;
    return neumann_smallest_eigs(sys.A, sys.M, m, eo);
  });
  // Zero-trace threshold relative to an M-normalized field: ||u||_dOmega
  // compared with sqrt(area / volume).
  const VectorXd one = VectorXd::Ones(sys.dofs.num_dofs());
  const double volume = one.dot(sys.M * one);
  const FacetField one_trace = facet_trace(mesh, sys.dofs, one);
  const double area = facet_inner(mesh, one_trace, one_trace);
  std::vector<Mode> modes;
  for (const auto& p : pairs) modes.push_back({p, facet_trace(mesh, sys.dofs, p.psi_tilde)});
  Classification out =
      build_report(mesh, std::move(modes), true, tau, options, options.zero_trace_tol * std::sqrt(area / volume));
  out.report.problem = "schiffer";
  out.report.m = m;
  out.report.num_dofs = sys.dofs.num_dofs();
  return out;
}

ConventionCheck resolve_convention(double mu_detected, double radius, const MaterialParams& params, double tolerance) {
  ConventionCheck c;
  c.mu_detected = mu_detected;
  c.mu_paper = ball_mode(1, radius, params, Convention::paper).mu;
  c.mu_lambda_sum = ball_mode(1, radius, params, Convention::lambda_sum).mu;
  c.err_paper = std::abs(mu_detected - c.mu_paper) / c.mu_paper;
  c.err_lambda_sum = std::abs(mu_detected - c.mu_lambda_sum) / c.mu_lambda_sum;
  const bool p = c.err_paper <= tolerance, l = c.err_lambda_sum <= tolerance;
  if (p != l) c.selected = p ? Convention::paper : Convention::lambda_sum;
  return c;
}

nlohmann::json to_json(const ClassificationReport& r) {
  nlohmann::json j;
  j["problem"] = r.problem;
  j["domain"] = r.domain;
  j["refinement"] = r.refinement;
  j["dimension"] = r.dimension;
  j["order"] = r.order;
  j["num_dofs"] = r.num_dofs;
  j["params"] = {{"lambda0", r.params.lambda0}, {"lambda1", r.params.lambda1}, {"nu", r.params.nu},
                 {"shift", r.params.shift}};
  j["m"] = r.m;
  j["targets"] = r.targets;
  j["tau"] = r.tau;
  j["cluster_tol"] = r.cluster_tol;
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : r.modes) {
    modes.push_back({{"k", m.k}, {"mu", m.mu}, {"residual", m.residual}, {"rho_single", m.rho_single},
                     {"q_single", m.q_single}, {"cluster", m.cluster}, {"rho", m.rho}, {"q", m.q},
                     {"zero_trace", m.zero_trace}});
  }
  j["modes"] = modes;
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) {
    clusters.push_back({{"members", c.members}, {"mu", c.mu}, {"rho", c.rho}, {"q", c.q},
                        {"coefficients", c.coefficients}});
  }
  j["clusters"] = clusters;
  j["witnesses"] = r.witnesses;
  j["witness_clusters"] = r.witness_clusters;
  j["verdict"] = to_string(r.verdict);
  j["metadata"] = r.metadata;
  return j;
}

ClassificationReport report_from_json(const nlohmann::json& j) {
  try {
    ClassificationReport r;
    r.problem = j.at("problem");
    r.domain = j.at("domain");
    r.refinement = j.at("refinement");
    r.dimension = j.at("dimension");
    r.order = j.at("order");
    r.num_dofs = j.at("num_dofs");
    const auto& p = j.at("params");
    r.params.lambda0 = p.at("lambda0");
    r.params.lambda1 = p.at("lambda1");
    r.params.nu = p.at("nu");
    r.params.shift = p.at("shift");
    r.m = j.at("m");
    r.targets = j.at("targets").get<std::vector<double>>();
    r.tau = j.at("tau");
    r.cluster_tol = j.at("cluster_tol");
    for (const auto& m : j.at("modes")) {
      ModeRecord rec;
      rec.k = m.at("k");
      rec.mu = m.at("mu");
      rec.residual = m.at("residual");
      rec.rho_single = m.at("rho_single");
      rec.q_single = m.at("q_single");
      rec.cluster = m.at("cluster");
      rec.rho = m.at("rho");
      rec.q = m.at("q");
      rec.zero_trace = m.at("zero_trace");
      r.modes.push_back(rec);
    }
    for (const auto& c : j.at("clusters")) {
      ClusterRecord rec;
      rec.members = c.at("members").get<std::vector<int>>();
      rec.mu = c.at("mu");
      rec.rho = c.at("rho");
      rec.q = c.at("q");
      rec.coefficients = c.at("coefficients").get<std::vector<double>>();
      r.clusters.push_back(rec);
    }
    r.witnesses = j.at("witnesses").get<std::vector<int>>();
    r.witness_clusters = j.at("witness_clusters");
    r.verdict = parse_verdict(j.at("verdict"));
    r.metadata = j.at("metadata");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("classification report: ") + e.what());
  }
}

void write_report_csv(std::ostream& out, const ClassificationReport& r) {
  out << (r.problem == "schiffer" ? "k,mu_S,rho,c_hat\n" : "k,mu,rho,q_hat\n");
  out << std::setprecision(17);
  for (const auto& m : r.modes) out << m.k << ',' << m.mu << ',' << m.rho << ',' << m.q << '\n';
}

std::vector<EigenPair> witness_basis(const Classification& c, const SparseMatrix& M) {
  std::vector<EigenPair> out;
  for (std::size_t i = 0; i < c.witness_fields.size(); ++i) {
    EigenPair e;
    e.mu = c.report.clusters.at(c.witness_cluster_ids.at(i)).mu;
    const double n = std::sqrt(c.witness_fields[i].dot(M * c.witness_fields[i]));
    if (!(n > 0.0)) throw Error("witness field has zero norm");
    e.psi_tilde = c.witness_fields[i] / n;
    e.psi = e.psi_tilde / std::sqrt(1.0 + e.mu);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace lamewave
