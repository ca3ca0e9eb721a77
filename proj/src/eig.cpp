#include "lamewave/eig.hpp"

#include "lamewave/error.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

namespace lamewave {

namespace {

struct Ritz {
  double lambda;
  VectorXd x;
  double residual;
};

// ||K x - lambda M x|| / ||K x||. Below the shift magnitude (kernel vectors
// of a semidefinite K) the denominator is floored at |sigma| ||M x||.
double relative_residual(const SpMat& K, const SpMat& M, const VectorXd& x, double lambda, double sigma = 0.0) {
  const VectorXd kx = K * x;
  const VectorXd mx = M * x;
  const double denom = std::max(kx.norm(), std::abs(sigma) * mx.norm());
  const VectorXd r = kx - lambda * mx;
  return denom > 0.0 ? r.norm() / denom : r.norm();
}

void fix_sign(VectorXd& x) {
  Eigen::Index imax = 0;
  x.cwiseAbs().maxCoeff(&imax);
  if (x[imax] < 0.0) x = -x;
}

// Indices of the m values nearest to `target`, ties broken by value.
std::vector<int> nearest(const std::vector<double>& values, double target, int m) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double da = std::abs(values[a] - target), db = std::abs(values[b] - target);
    return da != db ? da < db : values[a] < values[b];
  });
  idx.resize(std::min<std::size_t>(m, idx.size()));
  return idx;
}

std::vector<Ritz> dense_solve(const SpMat& K, const SpMat& M, int m, std::optional<double> target) {
  const MatrixXd kd(K), md(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(kd, md);
  if (es.info() != Eigen::Success) throw SolverError("dense generalized eigensolver failed");
  std::vector<double> values(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  const double t = target.value_or(-std::numeric_limits<double>::infinity());
  std::vector<int> pick;
  if (target) {
    pick = nearest(values, t, m);
  } else {
    pick.resize(std::min<std::size_t>(m, values.size()));
    std::iota(pick.begin(), pick.end(), 0);
  }
  std::vector<Ritz> out;
  for (int i : pick) {
    VectorXd x = es.eigenvectors().col(i);
    x /= std::sqrt(x.dot(M * x));
    out.push_back({values[i], x, relative_residual(K, M, x, values[i])});
  }
  return out;
}

// Block Lanczos for the shift-inverted operator (K - sigma M)^{-1} M, which is
// self-adjoint in the M inner product. Full reorthogonalization, no restart.
std::vector<Ritz> lanczos_solve(const SpMat& K, const SpMat& M, int m, double sigma, SparseFactor::Kind kind,
                                const EigOptions& opt) {
  const int n = static_cast<int>(K.rows());
  const int b = std::max(1, std::min(opt.block_size, n));
  const int max_basis = std::min(n, opt.max_basis > 0 ? opt.max_basis : std::max(10 * m + 40, 80));

  const SpMat shifted = sigma == 0.0 ? K : SpMat(K - sigma * M);
  SparseFactor factor(shifted, kind);

  MatrixXd V(n, max_basis + b), MV(n, max_basis + b);
  MatrixXd H = MatrixXd::Zero(max_basis + b, max_basis + b);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;

  // M-orthonormalize columns [k, k+cnt) of V against [0, k) and each other.
  // Projection coefficients go to H(:, col) when `col >= 0`.
  auto orthonormalize = [&](int k, int cnt, int hcol) {
    for (int j = k; j < k + cnt; ++j) {
      for (int attempt = 0;; ++attempt) {
        const double norm0 = std::sqrt(std::max(0.0, V.col(j).dot(M * V.col(j))));
        for (int pass = 0; pass < 2; ++pass) {
          if (j > 0) {
            const VectorXd c = MV.leftCols(j).transpose() * V.col(j);
            V.col(j) -= V.leftCols(j) * c;
            if (hcol >= 0 && attempt == 0) H.col(hcol + (j - k)).head(j) += c;
          }
        }
        MV.col(j) = M * V.col(j);
        const double norm = std::sqrt(std::max(0.0, V.col(j).dot(MV.col(j))));
        if (norm > 1e-10 * norm0 && norm > 0.0) {
          if (hcol >= 0 && attempt == 0) H(j, hcol + (j - k)) = norm;
          V.col(j) /= norm;
          MV.col(j) /= norm;
          break;
        }
        if (attempt > 3) throw SolverError("Lanczos: cannot extend the Krylov basis", sigma);
        // Invariant subspace found: continue with a fresh random direction.
        for (int i = 0; i < n; ++i) V(i, j) = normal(rng);
      }
    }
  };

  for (int j = 0; j < b; ++j) {
    for (int i = 0; i < n; ++i) V(i, j) = normal(rng);
  }
  orthonormalize(0, b, -1);

  int k = b;  // current basis size
  std::vector<Ritz> result;
  int converged = 0;
  while (true) {
    // Expand: W = (K - sigma M)^{-1} M V_block
    const int cnt = std::min(b, max_basis + b - k);
    if (cnt <= 0) break;
    V.middleCols(k, cnt) = factor.solve(MatrixXd(MV.middleCols(k - b, cnt)));
    orthonormalize(k, cnt, k - b);
    k += cnt;
    const int kk = k - b;  // columns with complete H entries
    if (kk < std::min(m + b, n) && k < max_basis) continue;

    const MatrixXd Hs = 0.5 * (H.topLeftCorner(kk, kk) + H.topLeftCorner(kk, kk).transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Hs);
    const VectorXd& theta = es.eigenvalues();
    std::vector<int> order(kk);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) { return std::abs(theta[a]) > std::abs(theta[c]); });
    const int want = std::min(m, kk);
    const MatrixXd R = H.block(kk, kk - b, b, b);
    bool all_estimated = true;
    for (int i = 0; i < want; ++i) {
      const VectorXd s = es.eigenvectors().col(order[i]);
      const double est = (R * s.tail(b)).norm();
      if (est > opt.tol * std::abs(theta[order[i]])) all_estimated = false;
    }
    const bool exhausted = k >= max_basis || kk >= n;
    if (!all_estimated && !exhausted) continue;

    result.clear();
    converged = 0;
    for (int i = 0; i < want; ++i) {
      const VectorXd s = es.eigenvectors().col(order[i]);
      VectorXd x = V.leftCols(kk) * s;
      x /= std::sqrt(x.dot(M * x));
      const double lambda = sigma + 1.0 / theta[order[i]];
      const double res = relative_residual(K, M, x, lambda, sigma);
      if (res <= opt.tol) ++converged;
      result.push_back({lambda, std::move(x), res});
    }
    if (converged == want) break;
    if (exhausted) {
      throw PartialResultError("Lanczos: " + std::to_string(converged) + " of " + std::to_string(want) +
                                   " eigenpairs converged before the basis limit",
                               static_cast<std::size_t>(converged));
    }
  }
  return result;
}

std::vector<EigenPair> finish(std::vector<Ritz> ritz, const std::vector<int>& free, int n_full, double offset) {
  std::stable_sort(ritz.begin(), ritz.end(), [](const Ritz& a, const Ritz& b) { return a.lambda < b.lambda; });
  std::vector<EigenPair> out;
  for (auto& r : ritz) {
    fix_sign(r.x);
    EigenPair p;
    p.mu = r.lambda - offset;
    p.psi_tilde = VectorXd::Zero(n_full);
    scatter(p.psi_tilde, free, r.x);
    p.psi = p.psi_tilde / std::sqrt(1.0 + p.mu);
    p.residual = r.residual;
    out.push_back(std::move(p));
  }
  return out;
}

double trace_ratio(const SpMat& K, const SpMat& M) {
  return K.diagonal().sum() / M.diagonal().sum();
}

std::vector<EigenPair> solve_reduced(const SparseMatrix& K, const SparseMatrix& M, int m, const EigOptions& opt,
                                     bool kernel_expected) {
  if (m < 1) throw InputError("eigensolver: m must be >= 1");
  if (K.rows() != K.cols() || M.rows() != K.rows() || M.cols() != K.cols()) {
    throw InputError("eigensolver: K and M must be square and of equal size");
  }
  if (!(opt.tol > 0.0)) throw InputError("eigensolver: tol must be positive");
  std::vector<int> constrained = K.constrained();
  constrained.insert(constrained.end(), M.constrained().begin(), M.constrained().end());
  std::sort(constrained.begin(), constrained.end());
  constrained.erase(std::unique(constrained.begin(), constrained.end()), constrained.end());
  const std::vector<int> free = complement(K.rows(), constrained);
  if (free.empty()) throw InputError("eigensolver: all DOFs are constrained");
  const SpMat kf = submatrix(K.colmajor(), free, free);
  const SpMat mf = submatrix(M.colmajor(), free, free);
  const int n = static_cast<int>(free.size());
  const int mm = std::min(m, n);

  std::vector<Ritz> ritz;
  if (n < opt.dense_threshold) {
    ritz = dense_solve(kf, mf, mm, opt.target);
  } else if (opt.target) {
    ritz = lanczos_solve(kf, mf, mm, *opt.target, SparseFactor::Kind::symmetric, opt);
  } else {
    const double sigma0 = 1e-3 * trace_ratio(kf, mf);
    if (kernel_expected || constrained.empty()) {
      ritz = lanczos_solve(kf, mf, mm, -sigma0, SparseFactor::Kind::spd, opt);
    } else {
      try {
        ritz = lanczos_solve(kf, mf, mm, 0.0, SparseFactor::Kind::spd, opt);
      } catch (const PartialResultError&) {
        throw;
      } catch (const SolverError&) {
        ritz = lanczos_solve(kf, mf, mm, -sigma0, SparseFactor::Kind::spd, opt);
      }
    }
  }
  return finish(std::move(ritz), free, K.rows(), opt.offset);
}

}  // namespace

std::vector<EigenPair> smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int m, const EigOptions& options) {
  return solve_reduced(K, M, m, options, false);
}

std::vector<EigenPair> smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int m, double tol,
                                     std::uint64_t seed) {
  EigOptions opt;
  opt.tol = tol;
  opt.seed = seed;
  return smallest_eigs(K, M, m, opt);
}

std::vector<EigenPair> neumann_smallest_eigs(const SparseMatrix& A, const SparseMatrix& M, int m,
                                             const EigOptions& options) {
  if (!A.constrained().empty()) throw InputError("neumann_smallest_eigs: matrix carries Dirichlet constraints");
  if (options.target) {
    auto pairs = solve_reduced(A, M, m, options, true);
    std::erase_if(pairs, [&](const EigenPair& p) { return p.mu <= options.mu_drop; });
    return pairs;
  }
  for (int extra = 1;; extra *= 2) {
    auto pairs = solve_reduced(A, M, m + extra, options, true);
    std::erase_if(pairs, [&](const EigenPair& p) { return p.mu <= options.mu_drop; });
    if (static_cast<int>(pairs.size()) >= m || m + extra >= A.rows()) {
      if (static_cast<int>(pairs.size()) > m) pairs.resize(m);
      return pairs;
    }
  }
}

std::vector<EigenPair> dirichlet_lame_eigs(const Mesh& mesh, const LameSystem& sys, int m, EigOptions options) {
  const double offset = sys.params.shift ? 1.0 : 0.0;
  options.offset = offset;
  if (options.target) *options.target += offset;
  const auto bd = sys.dofs.boundary_dofs(mesh, FacetTag::interface);
  const SparseMatrix K = apply_dirichlet(sys.K, bd, 1.0);
  return smallest_eigs(K, sys.M, m, options);
}

// ---------------------------------------------------------------------------
// Dump

std::string base64_encode(const std::string& bytes) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i < bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? table[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw InputError("base64: length not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    unsigned v = 0;
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = value(c);
      if (d < 0 || pad) throw InputError("base64: invalid character");
      v = (v << 6) | static_cast<unsigned>(d);
    }
    out += static_cast<char>((v >> 16) & 255);
    if (pad < 2) out += static_cast<char>((v >> 8) & 255);
    if (pad < 1) out += static_cast<char>(v & 255);
  }
  return out;
}

void write_eigenpairs(std::ostream& out, const std::vector<EigenPair>& pairs, const EigOptions& options) {
  nlohmann::json j;
  j["format"] = "lamewave-eigenpairs";
  j["version"] = 1;
  j["count"] = pairs.size();
  const std::size_t n = pairs.empty() ? 0 : static_cast<std::size_t>(pairs.front().psi_tilde.size());
  j["size"] = n;
  std::vector<double> mu, res;
  std::string bytes;
  bytes.reserve(pairs.size() * n * sizeof(double));
  for (const auto& p : pairs) {
    if (static_cast<std::size_t>(p.psi_tilde.size()) != n) throw InputError("write_eigenpairs: vector sizes differ");
    mu.push_back(p.mu);
    res.push_back(p.residual);
    bytes.append(reinterpret_cast<const char*>(p.psi_tilde.data()), n * sizeof(double));
  }
  j["mu"] = mu;
  j["residual"] = res;
  j["seed"] = options.seed;
  j["tol"] = options.tol;
  j["offset"] = options.offset;
  j["payload_layout"] = "psi_tilde vectors, pair-major, little-endian float64";
  j["payload"] = base64_encode(bytes);
  out << j.dump() << "\n";
}

std::vector<EigenPair> read_eigenpairs(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("eigenpair dump: ") + e.what());
  }
  if (j.value("format", "") != "lamewave-eigenpairs" || j.value("version", 0) != 1) {
    throw InputError("eigenpair dump: unknown format");
  }
  const std::size_t count = j.at("count"), n = j.at("size");
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto res = j.at("residual").get<std::vector<double>>();
  const std::string bytes = base64_decode(j.at("payload").get<std::string>());
  if (mu.size() != count || res.size() != count || bytes.size() != count * n * sizeof(double)) {
    throw InputError("eigenpair dump: inconsistent sizes");
  }
  std::vector<EigenPair> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k].mu = mu[k];
    out[k].residual = res[k];
    out[k].psi_tilde.resize(n);
    std::memcpy(out[k].psi_tilde.data(), bytes.data() + k * n * sizeof(double), n * sizeof(double));
    out[k].psi = out[k].psi_tilde / std::sqrt(1.0 + mu[k]);
  }
  return out;
}

}  // namespace lamewave
