#pragma once

#include "lamewave/ball.hpp"
#include "lamewave/eig.hpp"
#include "lamewave/fem.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lamewave {

// Best fit t ~ q n in the facet L2 norm.
struct TractionFit {
  double q = 0.0;
  double rho = 0.0;         // ||t - q n|| / ||t||
  bool degenerate = false;  // ||t|| = 0
  FacetField residual;      // t - q n
};

TractionFit fit_normal_traction(const FacetField& t, const Mesh& mesh);

// Same fit with a facet field of ones in place of n: trace ~ c (scalar field).
TractionFit fit_constant_trace(const FacetField& trace, const Mesh& mesh);

// Best linear combination of several fields against a reference shape g
// (n or 1): minimizes ||sum_i c_i t_i - q g|| / ||sum_i c_i t_i|| over c and q.
struct CombinationFit {
  Eigen::VectorXd coefficients;  // unit Euclidean norm, largest entry positive
  double q = 0.0;
  double rho = 1.0;
  bool degenerate = false;
};
CombinationFit fit_combination(const std::vector<FacetField>& fields, const FacetField& shape, const Mesh& mesh);

enum class Verdict { good_up_to_cutoff, bad, non_schiffer_up_to_cutoff, schiffer };
std::string to_string(Verdict v);
Verdict parse_verdict(const std::string& s);

struct ModeRecord {
  int k = 0;              // 1-based position in the computed list (ascending mu)
  double mu = 0.0;
  double residual = 0.0;  // eigensolver certificate
  double rho_single = 1.0;
  double q_single = 0.0;
  int cluster = 0;        // index into ClassificationReport::clusters
  double rho = 1.0;       // thresholded value: best combination over the cluster
  double q = 0.0;
  bool zero_trace = false;  // Schiffer c = 0 rule: excluded from the witness set
};

struct ClusterRecord {
  std::vector<int> members;  // 0-based mode positions
  double mu = 0.0;           // mean
  double rho = 1.0;
  double q = 0.0;
  std::vector<double> coefficients;
};

struct ClassificationReport {
  std::string problem;  // "lame" or "schiffer"
  std::string domain;
  int refinement = 0;
  int dimension = 3;
  int order = 2;
  int num_dofs = 0;
  MaterialParams params;
  int m = 0;
  std::vector<double> targets;  // spectral windows (empty: smallest modes)
  double tau = 0.1;
  double cluster_tol = 0.0;
  std::vector<ModeRecord> modes;
  std::vector<ClusterRecord> clusters;
  std::vector<int> witnesses;          // K-hat: 1-based k with rho_k < tau
  int witness_clusters = 0;            // distinct clusters among the witnesses
  Verdict verdict = Verdict::good_up_to_cutoff;
  nlohmann::json metadata = nlohmann::json::object();
};

struct ClassifyOptions {
  int order = 2;
  EigOptions eig;
  // Each entry adds the m eigenpairs nearest to the given mu; empty means the
  // m smallest.
  std::vector<double> targets;
  // A cluster starts at the lowest unassigned mode and takes every following
  // mode within this relative distance of it.
  double cluster_tol = 2e-3;
  double zero_trace_tol = 1e-8;
  int refinement = 0;  // metadata only
};

// Computed eigenpairs alongside the report (for downstream projections).
struct Classification {
  ClassificationReport report;
  std::vector<EigenPair> pairs;
  // One witness field per witness cluster: the best combination, M-normalized.
  std::vector<Eigen::VectorXd> witness_fields;
  std::vector<int> witness_cluster_ids;  // cluster of each witness field
};

// Witness fields as eigenpairs (mu = cluster mean, psi_tilde M-normalized,
// psi = psi_tilde / sqrt(1 + mu)), in the order of witness_fields.
std::vector<EigenPair> witness_basis(const Classification& c, const SparseMatrix& M);

Classification classify_bad_domain(const Mesh& mesh, const MaterialParams& params, int m, double tau,
                                   const ClassifyOptions& options = {});
Classification classify_schiffer(const Mesh& mesh, int m, double tau, const ClassifyOptions& options = {});

// Which ball convention matches a detected first witness eigenvalue within
// `tolerance` (relative). Empty when none or both match.
struct ConventionCheck {
  double mu_detected = 0.0;
  double mu_paper = 0.0;
  double mu_lambda_sum = 0.0;
  double err_paper = 0.0;
  double err_lambda_sum = 0.0;
  std::optional<Convention> selected;
};
ConventionCheck resolve_convention(double mu_detected, double radius, const MaterialParams& params,
                                   double tolerance = 0.05);

nlohmann::json to_json(const ClassificationReport& r);
ClassificationReport report_from_json(const nlohmann::json& j);
void write_report_csv(std::ostream& out, const ClassificationReport& r);

}  // namespace lamewave
