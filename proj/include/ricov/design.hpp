#ifndef RICOV_DESIGN_HPP
#define RICOV_DESIGN_HPP

#include <string>
#include <vector>

#include "ricov/cohort.hpp"

namespace ricov {

struct CellEstimate {
  std::string area_id;
  int cohort_index = 0;
  std::string survey_id;
  int sia_indicator = 0;
  long n = 0;
  double p_hat = 0;
  double v_hat = 0;
  double theta_hat = 0;
  double V_hat = 0;
};

enum class LonePsuPolicy { kCertainty, kGrandMean };

struct DesignOptions {
  LonePsuPolicy lone_psu = LonePsuPolicy::kCertainty;
  // Clamp degenerate estimates into [1/(2n), 1-1/(2n)] instead of dropping them.
  bool truncate_degenerate = false;
};

struct HtEstimate {
  double p_hat;
  long n;
};

struct LogitEstimate {
  double theta_hat;
  double V_hat;
};

/// Weighted ratio estimate sum(w*y)/sum(w).
HtEstimate ht_estimate(const EligibleCell& cell);

/// Taylor-linearized with-replacement variance of the ratio estimator,
/// stratified, between clusters.
double design_variance(const EligibleCell& cell,
                       LonePsuPolicy lone_psu = LonePsuPolicy::kCertainty);

/// Delta-method logit transform. Throws NumericalError for p in {0,1} or v <= 0.
LogitEstimate logit_transform(double p_hat, double v_hat);

struct DegenerateCell {
  std::string area_id;
  int cohort_index;
  std::string survey_id;
  long n;
  double p_hat;
  double v_hat;
  std::string reason;
};

struct DirectEstimates {
  std::vector<CellEstimate> estimates;
  std::vector<DegenerateCell> excluded;
};

/// Direct estimates for every cell, computed in parallel. Output order
/// follows the input order.
DirectEstimates estimate_cells(const std::vector<EligibleCell>& cells,
                               const DesignOptions& options = {});

namespace serial {
DirectEstimates estimate_cells(const std::vector<EligibleCell>& cells,
                               const DesignOptions& options = {});
}

}  // namespace ricov

#endif
