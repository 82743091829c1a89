#ifndef RICOV_SIMULATE_HPP
#define RICOV_SIMULATE_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ricov/cohort.hpp"
#include "ricov/gmrf.hpp"
#include "ricov/model.hpp"

namespace ricov {

struct SurveyPlan {
  std::string survey_id;
  int interview_cmc = 0;
  // Children are sampled from cohorts lying entirely inside this age window.
  int min_age_months = 12;
  int max_age_months = 47;
};

enum class WeightScheme { kEqual, kVariable };

struct SimConfig {
  AdjacencyGraph graph;
  std::vector<std::string> area_ids;  // empty: A01, A02, ...
  CohortGrid grid;
  std::vector<SurveyPlan> surveys;
  std::vector<SiaEvent> calendar;

  InteractionVariant truth_variant = InteractionVariant::kIcarAr1;
  Hyperparameters truth;
  double beta0 = 0.0;
  double beta1 = 0.3;
  double time_trend = 0.0;  // added to delta per cohort, centred

  int clusters_per_area = 5;
  int children_per_cluster = 10;
  int strata_per_area = 1;
  WeightScheme weights = WeightScheme::kEqual;
  double sigma_cluster = 0.2;  // cluster random intercept, logit scale
  int ri_age_months = 9;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<std::string> areas() const;
};

struct Truth {
  double beta0 = 0, beta1 = 0;
  VectorXd alpha, gamma, delta, tau, epsilon;
  MatrixXd phi;   // areas x cohorts
  MatrixXd mu;    // beta0 + alpha + gamma + delta + tau + phi
  MatrixXd p_ri;  // expit(mu)
};

/// Draws every component from its prior at the truth hyperparameters, in the
/// complement of the structure's null space.
Truth simulate_truth(const SimConfig& config);

/// Stratified cluster surveys of the truth. SIA exposure is assigned per child
/// from the calendar; vaccination probability is expit(mu + beta1 x + eps_s + u_cluster).
std::vector<ChildRecord> simulate_survey(const Truth& truth, const SimConfig& config);

/// Number of campaigns reaching a child born in `birth_cmc`, counted as the
/// campaigns whose exposed birth-month range contains the child's birth month.
int sia_exposure(int birth_cmc, int interview_cmc, const std::string& area_id,
                 const std::vector<SiaEvent>& calendar);

/// 3x3 lattice, 10 six-month cohorts, 3 surveys, ~50 children per area-survey,
/// one campaign between the first and second survey in five of the nine areas.
SimConfig small_scenario(std::uint64_t seed, int num_surveys = 3);

/// 37 areas, 38 cohorts (2000-2018), 9 surveys, alternating campaigns.
SimConfig nigeria_scenario(std::uint64_t seed);

/// Planar-like 37-node adjacency graph (6x6 lattice with diagonals in
/// alternate cells and one extra node).
AdjacencyGraph nigeria_like_graph();

/// Independent stream derived from (seed, stream).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace ricov

#endif
