#ifndef RICOV_SPARSE_CHOLESKY_HPP
#define RICOV_SPARSE_CHOLESKY_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

namespace ricov {

// Sparse LL^T with a fill-reducing (AMD) ordering computed from the sparsity
// pattern. Numeric refactorization reuses the symbolic analysis while the
// pattern is unchanged and re-analyzes otherwise.
class SparseCholesky {
 public:
  using SpMat = Eigen::SparseMatrix<double>;

  SparseCholesky() = default;
  explicit SparseCholesky(const SpMat& pattern) { analyze(pattern); }

  void analyze(const SpMat& pattern);
  /// Returns false when the matrix is not numerically positive definite.
  bool factorize(const SpMat& A);
  bool analyzed() const { return llt_ != nullptr; }
  bool factored() const { return factored_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
  /// P^T L^{-T} z: a draw with covariance A^{-1} when z ~ N(0, I).
  Eigen::VectorXd solve_lt(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd solve_lt(const Eigen::MatrixXd& Z) const;
  /// L^{-1} P B, the forward half of a solve.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& B) const;
  double log_det() const;
  /// Smallest squared diagonal entry of the factor.
  double min_pivot() const;
  long nnz_factor() const;
  int size() const { return n_; }

  /// Entries of A^{-1} on the sparsity pattern of the factor (Takahashi
  /// recursions). Any pair (i, j) that is structurally non-zero in A is
  /// available.
  class SelectedInverse {
   public:
    double operator()(int i, int j) const;
    Eigen::VectorXd diagonal() const;

   private:
    friend class SparseCholesky;
    double at_permuted(int r, int c) const;  // r >= c, factor ordering
    std::vector<int> colptr_, rowidx_, perm_;
    std::vector<double> values_;
  };
  SelectedInverse selected_inverse() const;

 private:
  using Llt = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;
  bool same_pattern(const SpMat& A) const;

  // Symbolic state is shared between copies; the numeric factor is owned.
  std::shared_ptr<Llt> llt_;
  std::vector<int> outer_, inner_;
  SpMat L_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P_, Pinv_;
  bool factored_ = false;
  int n_ = 0;
};

}  // namespace ricov

#endif
