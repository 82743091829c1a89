#ifndef RICOV_TESTS_ORACLES_HPP
#define RICOV_TESTS_ORACLES_HPP

// Dense reference computations used by the unit tests and the acceptance
// runner. They avoid the sparse code paths on purpose.

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ricov/cohort.hpp"
#include "ricov/core.hpp"
#include "ricov/latent_model.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eigenvalues above tol and the eigenvectors of the rest.
struct DenseSpectrum {
  double log_pdet = 0;
  int rank = 0;
  MatrixXd null_space;
};

inline DenseSpectrum spectrum(const MatrixXd& Q, double tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q);
  DenseSpectrum out;
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<int> nulls;
  for (int i = 0; i < Q.rows(); ++i) {
    const double l = es.eigenvalues()[i];
    if (l > tol * scale) {
      out.log_pdet += std::log(l);
      ++out.rank;
    } else {
      nulls.push_back(i);
    }
  }
  out.null_space.resize(Q.rows(), static_cast<int>(nulls.size()));
  for (std::size_t j = 0; j < nulls.size(); ++j)
    out.null_space.col(static_cast<int>(j)) = es.eigenvectors().col(nulls[j]);
  return out;
}

// Projector onto the column span of B.
inline MatrixXd projector(const MatrixXd& B) {
  if (B.cols() == 0) return MatrixXd::Zero(B.rows(), B.rows());
  Eigen::JacobiSVD<MatrixXd> svd(B, Eigen::ComputeThinU);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++r;
  const MatrixXd U = svd.matrixU().leftCols(r);
  return U * U.transpose();
}

// Orthonormal basis of {x : C x = 0}.
inline MatrixXd constraint_basis(const MatrixXd& C, int n) {
  if (C.rows() == 0) return MatrixXd::Identity(n, n);
  Eigen::FullPivLU<MatrixXd> lu(C);
  const MatrixXd K = lu.kernel();
  Eigen::HouseholderQR<MatrixXd> qr(K);
  return qr.householderQ() * MatrixXd::Identity(n, K.cols());
}

struct DenseGaussian {
  VectorXd mean;
  MatrixXd cov;
};

// Posterior of x given theta ~ N(A x, diag(V)), prior precision Q, restricted
// to C x = 0, computed in coordinates of the constraint subspace.
inline DenseGaussian constrained_posterior(const MatrixXd& Q, const MatrixXd& C,
                                           const MatrixXd& A, const VectorXd& theta,
                                           const VectorXd& V) {
  const int n = static_cast<int>(Q.rows());
  const MatrixXd N = constraint_basis(C, n);
  const MatrixXd D = V.cwiseInverse().asDiagonal();
  const MatrixXd P = N.transpose() * (Q + A.transpose() * D * A) * N;
  const MatrixXd Pinv = P.inverse();
  DenseGaussian out;
  out.mean = N * (Pinv * (N.transpose() * A.transpose() * D * theta));
  out.cov = N * Pinv * N.transpose();
  return out;
}

// log p(theta) with x restricted to C x = 0 and Gaussian there with precision
// N^T Q N: theta ~ N(0, A N (N^T Q N)^{-1} N^T A^T + diag(V)).
inline double log_marginal(const MatrixXd& Q, const MatrixXd& C, const MatrixXd& A,
                           const VectorXd& theta, const VectorXd& V) {
  const int n = static_cast<int>(Q.rows());
  const MatrixXd N = constraint_basis(C, n);
  const MatrixXd AN = A * N;
  const MatrixXd S = AN * (N.transpose() * Q * N).inverse() * AN.transpose() +
                     MatrixXd(V.asDiagonal());
  Eigen::LLT<MatrixXd> llt(S);
  const MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const VectorXd z = llt.matrixL().solve(theta);
  return -0.5 * (theta.size() * ricov::kLog2Pi + logdet + z.squaredNorm());
}

// Ratio estimator sum(w y) / sum(w) evaluated with complex weights.
inline std::complex<double> ratio(const std::vector<std::complex<double>>& w,
                                  const std::vector<int>& y) {
  std::complex<double> num = 0, den = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    num += w[j] * static_cast<double>(y[j]);
    den += w[j];
  }
  return num / den;
}

// With-replacement Taylor-linearized variance. The linearized value of each
// child is w_j d p / d w_j, obtained by a complex-step derivative; cluster
// totals are then compared within strata.
inline double design_variance(const std::vector<ricov::ChildRecord>& kids, bool grand_mean_lone) {
  const std::size_t m = kids.size();
  std::vector<std::complex<double>> w(m);
  std::vector<int> y(m);
  for (std::size_t j = 0; j < m; ++j) {
    w[j] = kids[j].weight;
    y[j] = kids[j].mcv1;
  }
  const double h = 1e-30;
  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto wp = w;
    wp[j] += std::complex<double>(0, h * kids[j].weight);
    z[j] = ratio(wp, y).imag() / h;
  }
  std::vector<std::string> strata;
  std::vector<std::vector<std::string>> ids;
  std::vector<std::vector<double>> tot;
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t s = 0;
    while (s < strata.size() && strata[s] != kids[j].stratum_id) ++s;
    if (s == strata.size()) {
      strata.push_back(kids[j].stratum_id);
      ids.emplace_back();
      tot.emplace_back();
    }
    std::size_t c = 0;
    while (c < ids[s].size() && ids[s][c] != kids[j].cluster_id) ++c;
    if (c == ids[s].size()) {
      ids[s].push_back(kids[j].cluster_id);
      tot[s].push_back(0.0);
    }
    tot[s][c] += z[j];
  }
  double all = 0;
  int count = 0;
  for (const auto& t : tot)
    for (double v : t) {
      all += v;
      ++count;
    }
  all /= count;
  double v = 0;
  for (const auto& t : tot) {
    const double k = static_cast<double>(t.size());
    if (t.size() == 1) {
      if (grand_mean_lone) v += (t[0] - all) * (t[0] - all);
      continue;
    }
    double mean = 0;
    for (double x : t) mean += x / k;
    for (double x : t) v += k / (k - 1) * (x - mean) * (x - mean);
  }
  return v;
}

inline double ht(const std::vector<ricov::ChildRecord>& kids) {
  std::vector<std::complex<double>> w;
  std::vector<int> y;
  for (const auto& k : kids) {
    w.emplace_back(k.weight);
    y.push_back(k.mcv1);
  }
  return ratio(w, y).real();
}

// Random cell with up to 5 strata, 6 clusters and 40 children.
inline ricov::EligibleCell random_cell(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nstrata(1, 5), nchildren(2, 40), coin(0, 1);
  std::uniform_real_distribution<double> weight(0.2, 5.0);
  const int H = nstrata(rng);
  std::uniform_int_distribution<int> nclusters(H, 6);
  const int K = nclusters(rng);
  const int M = std::max(K, nchildren(rng));
  ricov::EligibleCell cell;
  cell.area_id = "A";
  cell.survey_id = "S";
  cell.cohort_index = 1;
  for (int j = 0; j < M; ++j) {
    ricov::ChildRecord c;
    // every cluster gets at least one child; cluster k belongs to stratum k % H
    const int k = j < K ? j : std::uniform_int_distribution<int>(0, K - 1)(rng);
    c.cluster_id = "c" + std::to_string(k);
    c.stratum_id = "h" + std::to_string(k % H);
    c.weight = weight(rng);
    c.mcv1 = coin(rng);
    c.row = j + 1;
    cell.children.push_back(c);
  }
  return cell;
}

}  // namespace oracle

#endif
