#include "ricov/fit.hpp"

#include <cmath>
#include <cstdio>

#include "ricov/core.hpp"

namespace ricov {

GaussianData make_data(std::span<const CellEstimate> cells, const LatentLayout& layout,
                       const IndexMaps& maps) {
  GaussianData d;
  d.A = build_observation_matrix(cells, layout, maps);
  d.theta_hat.resize(static_cast<Eigen::Index>(cells.size()));
  d.V_hat.resize(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    d.theta_hat[c] = cells[c].theta_hat;
    d.V_hat[c] = cells[c].V_hat;
  }
  d.validate(layout.total);
  return d;
}

FitResult fit_model(const ModelSpec& spec, const AdjacencyGraph& graph, const IndexMaps& maps,
                    std::vector<CellEstimate> cells, const ExploreOptions& options) {
  spec.validate();
  if (cells.empty()) throw InputError("no direct estimates to fit");
  FitResult fit;
  fit.spec = spec;
  fit.graph = graph;
  fit.maps = maps;
  fit.cells = std::move(cells);
  const SpaceTimeModel model(spec, graph);
  fit.data = make_data(fit.cells, model.layout(), maps);
  fit.hyper = explore_hyper(model, fit.data, options);
  return fit;
}

void refresh_moments(FitResult& fit, const ExploreOptions& options) {
  const SpaceTimeModel model(fit.spec, fit.graph);
  std::vector<VectorXd> psis;
  for (const auto& p : fit.hyper.points) psis.push_back(p.psi);
  PosteriorOptions po = options.posterior;
  po.augment_all = po.augment_all || fit.hyper.augment_all;
  auto ev = evaluate_points(model, fit.data, psis, true, po, options.threads);
  fit.hyper.moments.clear();
  for (auto& e : ev) fit.hyper.moments.push_back(std::move(*e.moments));
}

std::vector<PosteriorSummary> ri_coverage(const MatrixXd& samples, const LatentLayout& layout,
                                          const std::vector<std::string>& area_ids) {
  if (samples.cols() == 0) throw InputError("no posterior samples");
  if (samples.rows() != layout.total) throw InputError("samples do not match the layout");
  if (static_cast<int>(area_ids.size()) != layout.num_areas)
    throw InputError("area id list does not match the layout");
  std::vector<PosteriorSummary> out;
  const int M = static_cast<int>(samples.cols());
  std::vector<double> p(M);
  for (int i = 0; i < layout.num_areas; ++i)
    for (int b = 0; b < layout.num_cohorts; ++b) {
      for (int m = 0; m < M; ++m) {
        const auto x = samples.col(m);
        p[m] = expit(x[layout.beta0] + x[layout.alpha + i] + x[layout.gamma + i] +
                     x[layout.delta + b] + x[layout.tau + b] + x[layout.phi_index(i, b)]);
      }
      out.push_back({area_ids[i], b + 1, nearest_rank_quantile(p, 0.5),
                     nearest_rank_quantile(p, 0.025), nearest_rank_quantile(p, 0.975)});
    }
  return out;
}

std::vector<QuantileSummary> fixed_effects(const MatrixXd& samples, const LatentLayout& layout) {
  if (samples.cols() == 0) throw InputError("no posterior samples");
  auto summarize = [&](const std::string& name, auto f) {
    std::vector<double> v;
    for (int m = 0; m < samples.cols(); ++m) v.push_back(f(samples.col(m)));
    return QuantileSummary{name, nearest_rank_quantile(v, 0.5), nearest_rank_quantile(v, 0.025),
                           nearest_rank_quantile(v, 0.975)};
  };
  return {summarize("beta0", [&](const auto& x) { return x[layout.beta0]; }),
          summarize("beta1", [&](const auto& x) { return x[layout.beta1]; }),
          summarize("exp_beta1", [&](const auto& x) { return odds_multiplier(x[layout.beta1]); })};
}

double odds_multiplier(double beta1) { return std::exp(beta1); }

std::string percent_higher(double beta1) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * (odds_multiplier(beta1) - 1.0));
  return buf;
}

std::string odds_statement(double beta_lo, double beta_hi) {
  return percent_higher(beta_lo) + " -- " + percent_higher(beta_hi) + " higher";
}

}  // namespace ricov
