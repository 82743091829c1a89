#include "ricov/sparse_cholesky.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "ricov/core.hpp"

namespace ricov {

void SparseCholesky::analyze(const SpMat& pattern) {
  llt_ = std::make_shared<Llt>();
  llt_->analyzePattern(pattern);
  n_ = static_cast<int>(pattern.rows());
  outer_.assign(pattern.outerIndexPtr(), pattern.outerIndexPtr() + pattern.outerSize() + 1);
  inner_.assign(pattern.innerIndexPtr(), pattern.innerIndexPtr() + pattern.nonZeros());
}

bool SparseCholesky::same_pattern(const SpMat& A) const {
  if (A.rows() != n_ || !A.isCompressed()) return false;
  if (static_cast<std::size_t>(A.nonZeros()) != inner_.size()) return false;
  return std::equal(outer_.begin(), outer_.end(), A.outerIndexPtr()) &&
         std::equal(inner_.begin(), inner_.end(), A.innerIndexPtr());
}

bool SparseCholesky::factorize(const SpMat& A) {
  if (!llt_ || !same_pattern(A)) {
    SpMat C = A;
    C.makeCompressed();
    analyze(C);
  }
  llt_->factorize(A);
  factored_ = llt_->info() == Eigen::Success;
  if (!factored_) return false;
  L_ = llt_->matrixL().nestedExpression();
  P_ = llt_->permutationP();
  Pinv_ = llt_->permutationPinv();
  return true;
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd y = P_ * b;
  L_.triangularView<Eigen::Lower>().solveInPlace(y);
  L_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return Pinv_ * y;
}

Eigen::MatrixXd SparseCholesky::solve(const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd Y = P_ * B;
  L_.triangularView<Eigen::Lower>().solveInPlace(Y);
  L_.transpose().triangularView<Eigen::Upper>().solveInPlace(Y);
  return Pinv_ * Y;
}

Eigen::VectorXd SparseCholesky::solve_lt(const Eigen::VectorXd& z) const {
  Eigen::VectorXd y = z;
  L_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return Pinv_ * y;
}

Eigen::MatrixXd SparseCholesky::solve_lt(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd Y = Z;
  L_.transpose().triangularView<Eigen::Upper>().solveInPlace(Y);
  return Pinv_ * Y;
}

Eigen::MatrixXd SparseCholesky::forward(const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd Y = P_ * B;
  L_.triangularView<Eigen::Lower>().solveInPlace(Y);
  return Y;
}

double SparseCholesky::log_det() const { return 2.0 * L_.diagonal().array().log().sum(); }

double SparseCholesky::min_pivot() const { return L_.diagonal().cwiseAbs2().minCoeff(); }

long SparseCholesky::nnz_factor() const { return static_cast<long>(L_.nonZeros()); }

double SparseCholesky::SelectedInverse::at_permuted(int r, int c) const {
  const auto begin = rowidx_.begin() + colptr_[c];
  const auto end = rowidx_.begin() + colptr_[c + 1];
  const auto it = std::lower_bound(begin, end, r);
  if (it == end || *it != r)
    throw NumericalError("selected inverse: entry outside the factor pattern");
  return values_[static_cast<std::size_t>(it - rowidx_.begin())];
}

double SparseCholesky::SelectedInverse::operator()(int i, int j) const {
  const int a = perm_[i], b = perm_[j];
  return a >= b ? at_permuted(a, b) : at_permuted(b, a);
}

Eigen::VectorXd SparseCholesky::SelectedInverse::diagonal() const {
  const int n = static_cast<int>(perm_.size());
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = (*this)(i, i);
  return d;
}

SparseCholesky::SelectedInverse SparseCholesky::selected_inverse() const {
  const SpMat& L = L_;
  const int n = static_cast<int>(L.cols());
  SelectedInverse Z;
  Z.colptr_.assign(n + 1, 0);
  std::vector<double> lval;
  // copy the factor with sorted row indices per column
  for (int c = 0; c < n; ++c) {
    std::vector<std::pair<int, double>> col;
    for (SpMat::InnerIterator it(L, c); it; ++it) col.emplace_back(static_cast<int>(it.row()), it.value());
    std::sort(col.begin(), col.end());
    for (const auto& [r, v] : col) {
      Z.rowidx_.push_back(r);
      lval.push_back(v);
    }
    Z.colptr_[c + 1] = static_cast<int>(Z.rowidx_.size());
  }
  Z.values_.assign(lval.size(), 0.0);

  // Z = (L L^T)^{-1} on the pattern of L, by supernodes from the last one
  // back. For a supernode with diagonal block L11, below-diagonal block L21
  // and row set R,
  //   Z21 = -Z(R,R) L21 L11^{-1},  Z11 = L11^{-T} L11^{-1} - Z21^T L21 L11^{-1}.
  // R is a clique in the filled graph, so Z(R,R) is gathered by walking each
  // column of R once.
  auto count = [&](int c) { return Z.colptr_[c + 1] - Z.colptr_[c]; };
  std::vector<int> first;
  for (int j = 0; j < n;) {
    first.push_back(j);
    int e = j;
    while (e + 1 < n && count(e) == count(e + 1) + 1 && count(e) > 1 &&
           Z.rowidx_[Z.colptr_[e] + 1] == e + 1)
      ++e;
    j = e + 1;
  }
  first.push_back(n);

  Eigen::MatrixXd G, L11, L21, X, Z21, Z11, Linv;
  for (int k = static_cast<int>(first.size()) - 2; k >= 0; --k) {
    const int f = first[k], w = first[k + 1] - f;
    const int p0 = Z.colptr_[f];
    const int m = count(f) - w;
    const int* R = Z.rowidx_.data() + p0 + w;

    L11.setZero(w, w);
    L21.resize(m, w);
    for (int b = 0; b < w; ++b) {
      const int q = Z.colptr_[f + b];
      for (int a = b; a < w; ++a) L11(a, b) = lval[q + a - b];
      for (int s = 0; s < m; ++s) L21(s, b) = lval[q + w - b + s];
    }
    Linv = L11.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(w, w));
    Z11.noalias() = Linv.transpose() * Linv;
    if (m > 0) {
      G.resize(m, m);
      for (int t = 0; t < m; ++t) {
        const int c = R[t];
        int q = Z.colptr_[c];
        G(t, t) = Z.values_[q];
        for (int s = t + 1; s < m; ++s) {
          while (Z.rowidx_[q] < R[s]) ++q;
          G(s, t) = Z.values_[q];
        }
      }
      X.noalias() = L21 * Linv;
      Z21.noalias() = -(G.selfadjointView<Eigen::Lower>() * X);
      Z11.noalias() -= Z21.transpose() * X;
    }
    for (int b = 0; b < w; ++b) {
      const int q = Z.colptr_[f + b];
      for (int a = b; a < w; ++a) Z.values_[q + a - b] = Z11(a, b);
      for (int s = 0; s < m; ++s) Z.values_[q + w - b + s] = Z21(s, b);
    }
  }

  Z.perm_.resize(n);
  for (int i = 0; i < n; ++i) Z.perm_[i] = P_.indices()[i];
  return Z;
}

}  // namespace ricov
