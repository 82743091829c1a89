#ifndef RICOV_LATENT_MODEL_HPP
#define RICOV_LATENT_MODEL_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <string>
#include <vector>

namespace ricov {

// Linear constraints C x = 0, one row per constraint.
struct ConstraintSet {
  Eigen::SparseMatrix<double, Eigen::RowMajor> C;
  // Rows that may be added as kappa c c^T to a precision without heavy fill.
  std::vector<bool> fill_friendly;

  int size() const { return static_cast<int>(C.rows()); }
};

// Prior precision at one hyperparameter value. When `intrinsic` is set, every
// constraint lies in the null space of Q and log_pdet/rank describe Q on the
// complement of its null space; otherwise Q is full rank.
struct PriorPrecision {
  Eigen::SparseMatrix<double> Q;
  double log_pdet = 0;
  int rank = 0;
  bool intrinsic = false;
};

struct LatentBlock {
  std::string name;
  int offset = 0;
  int size = 0;
};

// A latent Gaussian model with hyperparameters on an unconstrained scale.
class LatentModel {
 public:
  virtual ~LatentModel() = default;
  virtual int latent_dim() const = 0;
  virtual int hyper_dim() const = 0;
  virtual std::vector<std::string> hyper_names() const = 0;
  virtual PriorPrecision prior_precision(std::span<const double> psi) const = 0;
  virtual double log_hyperprior(std::span<const double> psi) const = 0;
  virtual const ConstraintSet& constraints() const = 0;
  virtual Eigen::VectorXd initial_hyper() const = 0;
  virtual std::vector<LatentBlock> blocks() const { return {{"latent", 0, latent_dim()}}; }
  /// Hyperparameters on their reporting scale (defaults to psi itself).
  virtual std::vector<double> natural_hyper(std::span<const double> psi) const {
    return {psi.begin(), psi.end()};
  }
};

// Gaussian working likelihood theta_hat ~ N(A x, diag(V_hat)).
struct GaussianData {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd V_hat;

  int size() const { return static_cast<int>(theta_hat.size()); }
  void validate(int latent_dim) const;
};

}  // namespace ricov

#endif
