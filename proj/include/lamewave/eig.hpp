#pragma once

#include "lamewave/fem.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lamewave {

// One eigenpair of a pencil (K, M). `mu` is the pencil value minus the
// configured offset (1 when K carries the +xi shift, 0 otherwise).
struct EigenPair {
  double mu = 0.0;
  VectorXd psi_tilde;  // M-normalized
  VectorXd psi;        // psi_tilde / sqrt(1 + mu)
  double residual = 0.0;  // ||K x - lambda M x||_2 / ||K x||_2
};

struct EigOptions {
  double tol = 1e-8;
  std::uint64_t seed = 1;
  // Return the m eigenvalues nearest to `target` (pencil value) instead of the
  // m smallest.
  std::optional<double> target;
  double offset = 0.0;
  int block_size = 4;
  int max_basis = 0;        // 0: automatic
  int dense_threshold = 2000;
  double mu_drop = 1e-8;    // Neumann: modes with mu <= mu_drop are dropped
};

// Smallest (or nearest-to-target) eigenpairs of K x = lambda M x. Constrained
// DOFs recorded in K are removed; returned vectors are zero there. Sorted
// ascending. Throws SolverError on factorization failure and
// PartialResultError when the Krylov space is exhausted.
std::vector<EigenPair> smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int m,
                                     const EigOptions& options = {});
std::vector<EigenPair> smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int m, double tol,
                                     std::uint64_t seed);

// Nonzero Neumann modes: the kernel of A (constants) is filtered out.
std::vector<EigenPair> neumann_smallest_eigs(const SparseMatrix& A, const SparseMatrix& M, int m,
                                             const EigOptions& options = {});

// Dirichlet-Lame pencil of the structure: K (unshifted or shifted) with the
// interface DOFs constrained, and M. `mu` of the result is always unshifted.
std::vector<EigenPair> dirichlet_lame_eigs(const Mesh& mesh, const LameSystem& sys, int m,
                                           EigOptions options = {});

// Eigenpair dump: a single JSON object on one line,
//   {"format":"lamewave-eigenpairs","version":1,"count":k,"size":n,
//    "mu":[...],"residual":[...],"seed":s,"tol":t,"offset":o,
//    "payload":"base64","payload_layout":"psi_tilde, k*n little-endian float64, pair-major"}
void write_eigenpairs(std::ostream& out, const std::vector<EigenPair>& pairs, const EigOptions& options);
std::vector<EigenPair> read_eigenpairs(std::istream& in);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace lamewave
