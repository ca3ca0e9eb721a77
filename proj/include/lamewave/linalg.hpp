#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <span>
#include <vector>

namespace lamewave {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sparse direct factorization. `spd` uses a supernodal Cholesky; `symmetric`
// (indefinite) and `general` use a pivoting LU, the former with the
// symmetric-pattern strategy.
class SparseFactor {
 public:
  enum class Kind { spd, symmetric, general };

  SparseFactor(const SpMat& a, Kind kind);
  ~SparseFactor();
  SparseFactor(SparseFactor&&) noexcept;
  SparseFactor& operator=(SparseFactor&&) noexcept;

  VectorXd solve(const VectorXd& b) const;
  MatrixXd solve(const MatrixXd& b) const;
  int size() const { return n_; }
  Kind kind() const { return kind_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Kind kind_;
  int n_ = 0;
};

// Rows and columns `keep` of a (in that order).
SpMat submatrix(const SpMat& a, std::span<const int> rows, std::span<const int> cols);

// Indices in [0, n) not listed in `excluded`.
std::vector<int> complement(int n, std::span<const int> excluded);

// Scatter/gather between a full vector and the entries listed in `index`.
VectorXd gather(const VectorXd& full, std::span<const int> index);
void scatter(VectorXd& full, std::span<const int> index, const VectorXd& part);

}  // namespace lamewave
