#ifndef RICOV_FIT_HPP
#define RICOV_FIT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ricov/inference.hpp"
#include "ricov/model.hpp"

namespace ricov {

// Everything needed to rebuild the model and revisit the posterior.
struct FitResult {
  ModelSpec spec;
  AdjacencyGraph graph;
  IndexMaps maps;
  std::vector<CellEstimate> cells;
  GaussianData data;
  HyperPosterior hyper;
};

GaussianData make_data(std::span<const CellEstimate> cells, const LatentLayout& layout,
                       const IndexMaps& maps);

/// Mode search plus grid exploration for one interaction variant.
FitResult fit_model(const ModelSpec& spec, const AdjacencyGraph& graph, const IndexMaps& maps,
                    std::vector<CellEstimate> cells, const ExploreOptions& options = {});

/// Recomputes per-point moments (e.g. for a fit read back from disk).
void refresh_moments(FitResult& fit, const ExploreOptions& options = {});

struct PosteriorSummary {
  std::string area_id;
  int cohort = 0;
  double median = 0, lower95 = 0, upper95 = 0;
};

/// expit(beta0 + alpha_i + gamma_i + delta_b + tau_b + phi_ib) per draw,
/// summarized by nearest-rank quantiles. Survey effects and the SIA term
/// are left out.
std::vector<PosteriorSummary> ri_coverage(const MatrixXd& samples, const LatentLayout& layout,
                                          const std::vector<std::string>& area_ids);

struct QuantileSummary {
  std::string name;
  double median = 0, lower95 = 0, upper95 = 0;
};

/// beta0, beta1 and the odds multiplier exp(beta1).
std::vector<QuantileSummary> fixed_effects(const MatrixXd& samples, const LatentLayout& layout);

double odds_multiplier(double beta1);
/// "33.6%" style percentage increase in odds for a log-odds effect.
std::string percent_higher(double beta1);
/// "33.6% -- 37.7% higher" for an interval of log-odds effects.
std::string odds_statement(double beta_lo, double beta_hi);

}  // namespace ricov

#endif
