#ifndef RICOV_ASSESSMENT_HPP
#define RICOV_ASSESSMENT_HPP

#include <array>
#include <vector>

#include "ricov/inference.hpp"

namespace ricov {

// Posterior of the linear predictor per cell as a Gaussian mixture over the
// hyperparameter grid: component k has weight w[k] and per-cell moments
// mean(k, c), var(k, c).
struct PredictorMixture {
  VectorXd w;
  MatrixXd mean, var;  // points x cells

  static PredictorMixture from(const HyperPosterior& hp);
  int num_points() const { return static_cast<int>(w.size()); }
  int num_cells() const { return static_cast<int>(mean.cols()); }
};

struct PointwiseTerms {
  VectorXd deviance_at_mean;  // -2 log p(theta_hat_c | eta_bar_c)
  VectorXd mean_deviance;     // E[-2 log p(theta_hat_c | eta_c)]
  VectorXd lppd;              // log E[p(theta_hat_c | eta_c)]
  VectorXd var_loglik;        // Var[log p(theta_hat_c | eta_c)]
  VectorXd neg_log_cpo;       // -log p(theta_hat_c | data without c)
};

/// Per-cell terms, computed in parallel over cells.
PointwiseTerms pointwise_terms(const PredictorMixture& mix, const GaussianData& data,
                               int threads = 0);
namespace serial {
PointwiseTerms pointwise_terms(const PredictorMixture& mix, const GaussianData& data);
}

double dic(const PointwiseTerms& t);
double effective_parameters(const PointwiseTerms& t);
double waic(const PointwiseTerms& t);
double lcpo(const PointwiseTerms& t);

/// Shares of the weighted posterior medians of the six component variances
/// (ICAR, Space IID, RW2, Time IID, Space x Time, Survey).
std::array<double, 6> variance_decomposition(const HyperPosterior& hp);

struct AssessmentReport {
  double dic = 0, p_d = 0, waic = 0, lcpo = 0;
  std::array<double, 6> variance_shares{};
};

AssessmentReport assess(const HyperPosterior& hp, const GaussianData& data, int threads = 0);

}  // namespace ricov

#endif
