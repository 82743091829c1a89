#ifndef RICOV_INFERENCE_HPP
#define RICOV_INFERENCE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ricov/latent_model.hpp"
#include "ricov/sparse_cholesky.hpp"

namespace ricov {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct PosteriorOptions {
  // Weight of the constraint penalty kappa * C^T C added before factorizing.
  double kappa = 1.0;
  // Add every constraint row, not only the fill-friendly ones.
  bool augment_all = false;
};

// Gaussian posterior of the latent field given the hyperparameters, conditioned
// on the linear constraints C x = 0.
class GaussianPosterior {
 public:
  const VectorXd& mean() const { return mean_; }
  const SpMat& precision() const { return precision_; }
  const ConstraintSet& constraints() const { return constraints_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  int num_constraints() const { return constraints_.size(); }
  long nnz_factor() const { return chol_->nnz_factor(); }
  bool augmented_all() const { return augmented_all_; }

  /// Mean and variance of a^T x for a sparse a whose support pairs are all
  /// structurally non-zero in the posterior precision (e.g. a row of A).
  std::pair<double, double> linear_moments(const Eigen::SparseVector<double>& a) const;
  /// Variance of a^T x for an arbitrary dense a (one extra solve).
  double variance_of(const VectorXd& a) const;
  VectorXd marginal_variances() const;
  /// Dense constrained covariance; intended for small models.
  MatrixXd covariance() const;

  /// One constrained draw using standard normals taken from `rng`.
  VectorXd sample(std::mt19937_64& rng) const;

  /// Log density of the constrained posterior at its mean, with respect to
  /// Lebesgue measure on the constraint subspace.
  double log_density_at_mean() const;

 private:
  friend GaussianPosterior conditional_posterior(const SpMat&, const ConstraintSet&,
                                                 const SpMat&, const VectorXd&,
                                                 const VectorXd&, const PosteriorOptions&,
                                                 SparseCholesky*, std::span<const LatentBlock>);
  const SparseCholesky::SelectedInverse& selected() const;
  const MatrixXd& constraint_solve() const;

  VectorXd mean_;            // constrained mean
  VectorXd unconstrained_;   // mean under the augmented precision
  SpMat precision_;          // Q_prior + A^T D A
  ConstraintSet constraints_;
  std::shared_ptr<SparseCholesky> chol_;  // augmented precision
  MatrixXd G_;                            // L^{-1} P C^T
  Eigen::LLT<MatrixXd> W_;                // C Q_aug^{-1} C^T = G^T G
  double log_det_W_ = 0, log_det_CCt_ = 0;
  bool augmented_all_ = false;
  mutable std::shared_ptr<SparseCholesky::SelectedInverse> selected_;
  mutable std::shared_ptr<MatrixXd> V_;  // Q_aug^{-1} C^T, built on demand
};

/// Q_post = Q_prior + A^T diag(V)^-1 A, mean solving Q_post m = A^T diag(V)^-1 theta,
/// then conditioned on the constraints by kriging. `cache` (optional) reuses
/// the symbolic factorization across calls; `blocks` only feed diagnostics.
GaussianPosterior conditional_posterior(const SpMat& Q_prior, const ConstraintSet& constraints,
                                        const SpMat& A, const VectorXd& theta_hat,
                                        const VectorXd& V_hat,
                                        const PosteriorOptions& options = {},
                                        SparseCholesky* cache = nullptr,
                                        std::span<const LatentBlock> blocks = {});

GaussianPosterior conditional_posterior(const LatentModel& model, std::span<const double> psi,
                                        const GaussianData& data,
                                        const PosteriorOptions& options = {},
                                        SparseCholesky* cache = nullptr);

/// log pi(psi) + log p(theta_hat | psi), the latter exact by Gaussian
/// marginalization.
double log_marginal_hyper(const LatentModel& model, std::span<const double> psi,
                          const GaussianData& data, const PosteriorOptions& options = {},
                          SparseCholesky* cache = nullptr);

/// log p(theta_hat | psi) only.
double log_marginal_likelihood(const LatentModel& model, std::span<const double> psi,
                               const GaussianData& data, const PosteriorOptions& options = {},
                               SparseCholesky* cache = nullptr);

struct HyperGridPoint {
  VectorXd psi;                 // internal scale
  std::vector<double> natural;  // reporting scale
  double log_posterior = 0;
  double weight = 0;
};

// Per grid point posterior moments needed downstream.
struct PointMoments {
  VectorXd eta_mean, eta_var;        // linear predictor per observation
  VectorXd latent_mean;              // every latent coordinate
};

struct ExploreOptions {
  int points_per_dim = 5;
  double half_width = 2.5;     // grid extent in posterior sd units
  bool prune_sphere = true;    // keep only points with |z| <= half_width
  double max_log_drop = 6.0;   // drop points this far below the mode
  double grad_tol = 1e-5;
  int max_iter = 400;
  double hessian_step = 0.02;
  int threads = 0;             // 0: OpenMP default
  PosteriorOptions posterior;
};

struct HyperPosterior {
  VectorXd mode;
  MatrixXd hessian;  // of -log posterior at the mode
  double mode_log_posterior = 0;
  double mode_gradient_norm = 0;
  int iterations = 0;
  std::vector<std::string> names;
  std::vector<HyperGridPoint> points;
  std::vector<PointMoments> moments;  // parallel to points
  bool augment_all = false;
  long nnz_factor = 0;
};

/// Locates the posterior mode of the hyperparameters, then integrates over a
/// mode-centred grid in Hessian-standardized coordinates.
HyperPosterior explore_hyper(const LatentModel& model, const GaussianData& data,
                             const ExploreOptions& options = {});

/// Gradient of log pi(psi | data) by a fourth-order central difference.
VectorXd log_posterior_gradient(const LatentModel& model, std::span<const double> psi,
                                const GaussianData& data, const PosteriorOptions& options,
                                SparseCholesky* cache, double step = 1e-3);

struct PointEvaluation {
  double log_posterior = 0;
  std::optional<PointMoments> moments;
};

/// Evaluates log posterior (and optionally moments) at every psi in parallel.
std::vector<PointEvaluation> evaluate_points(const LatentModel& model, const GaussianData& data,
                                             const std::vector<VectorXd>& psis,
                                             bool with_moments, const PosteriorOptions& options,
                                             int threads = 0);

/// M latent draws (columns): grid point by weight, then a constrained
/// Gaussian draw. Draw m uses its own RNG stream seeded by (seed, m).
MatrixXd sample_posterior(const LatentModel& model, const GaussianData& data,
                          const std::vector<HyperGridPoint>& points, int M, std::uint64_t seed,
                          const PosteriorOptions& options = {}, int threads = 0);

namespace serial {
std::vector<PointEvaluation> evaluate_points(const LatentModel& model, const GaussianData& data,
                                             const std::vector<VectorXd>& psis,
                                             bool with_moments, const PosteriorOptions& options);
MatrixXd sample_posterior(const LatentModel& model, const GaussianData& data,
                          const std::vector<HyperGridPoint>& points, int M, std::uint64_t seed,
                          const PosteriorOptions& options = {});
}  // namespace serial

/// Nearest-rank quantile of unsorted values, p in (0,1].
double nearest_rank_quantile(std::vector<double> values, double p);

/// Quantile of a Gaussian mixture sum_k w_k N(mean_k, var_k).
double mixture_quantile(std::span<const double> weights, std::span<const double> means,
                        std::span<const double> vars, double p);

/// Weighted quantile of discrete support points (linear interpolation of
/// the mid-point CDF).
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

}  // namespace ricov

#endif
