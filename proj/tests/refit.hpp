#ifndef RICOV_TESTS_REFIT_HPP
#define RICOV_TESTS_REFIT_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ricov/core.hpp"
#include "ricov/inference.hpp"
#include "ricov/model.hpp"

namespace oracle {

// -log p(theta_c | data without c) by refitting without cell c at every grid
// point: hyperparameter weights from the reduced-data marginal, predictive
// moments from the reduced-data posterior.
inline double refit_neg_log_cpo(const ricov::LatentModel& model, const ricov::GaussianData& data,
                                const std::vector<ricov::HyperGridPoint>& points, int c) {
  const int C = data.size();
  const Eigen::MatrixXd A(data.A);
  ricov::GaussianData reduced;
  Eigen::MatrixXd Ar(C - 1, A.cols());
  reduced.theta_hat.resize(C - 1);
  reduced.V_hat.resize(C - 1);
  for (int r = 0, o = 0; r < C; ++r) {
    if (r == c) continue;
    Ar.row(o) = A.row(r);
    reduced.theta_hat[o] = data.theta_hat[r];
    reduced.V_hat[o] = data.V_hat[r];
    ++o;
  }
  reduced.A = Ar.sparseView();
  const Eigen::VectorXd a = A.row(c).transpose();
  const double y = data.theta_hat[c], V = data.V_hat[c];

  std::vector<double> lw, lp;
  for (const auto& p : points) {
    const std::span<const double> psi(p.psi.data(), static_cast<std::size_t>(p.psi.size()));
    lw.push_back(ricov::log_marginal_hyper(model, psi, reduced));
    const auto post = ricov::conditional_posterior(model, psi, reduced);
    lp.push_back(ricov::log_normal_pdf(y, a.dot(post.mean()), V + post.variance_of(a)));
  }
  const double mw = *std::max_element(lw.begin(), lw.end());
  double num = 0, den = 0;
  for (std::size_t k = 0; k < lw.size(); ++k) {
    den += std::exp(lw[k] - mw);
    num += std::exp(lw[k] - mw + lp[k]);
  }
  return -std::log(num / den);
}

// A space-time model with at most `max_cells` random cells.
struct SmallProblem {
  ricov::ModelSpec spec;
  ricov::AdjacencyGraph graph;
  ricov::GaussianData data;
};

inline SmallProblem small_problem(ricov::InteractionVariant v, int max_cells, std::mt19937_64& rng) {
  SmallProblem p;
  p.spec.variant = v;
  p.spec.num_areas = 3;
  p.spec.num_cohorts = 4;
  p.spec.num_surveys = 2;
  p.graph = ricov::AdjacencyGraph::lattice(1, 3);
  const auto layout = ricov::build_layout(p.spec);
  std::vector<std::array<int, 3>> all;
  for (int i = 0; i < 3; ++i)
    for (int b = 0; b < 4; ++b)
      for (int s = 0; s < 2; ++s) all.push_back({i, b, s});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(max_cells));
  std::vector<Eigen::Triplet<double>> t;
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0, 1);
  p.data.theta_hat.resize(max_cells);
  p.data.V_hat.resize(max_cells);
  for (int r = 0; r < max_cells; ++r) {
    const auto [i, b, s] = all[r];
    const int x = u(rng) < 0.3 ? 1 : 0;
    t.emplace_back(r, layout.beta0, 1.0);
    t.emplace_back(r, layout.beta1, static_cast<double>(x));
    t.emplace_back(r, layout.alpha + i, 1.0);
    t.emplace_back(r, layout.gamma + i, 1.0);
    t.emplace_back(r, layout.delta + b, 1.0);
    t.emplace_back(r, layout.tau + b, 1.0);
    t.emplace_back(r, layout.phi_index(i, b), 1.0);
    t.emplace_back(r, layout.epsilon + s, 1.0);
    p.data.theta_hat[r] = 0.8 + 0.3 * x + 0.4 * z(rng);
    p.data.V_hat[r] = 0.05 + 0.2 * u(rng);
  }
  p.data.A.resize(max_cells, layout.total);
  p.data.A.setFromTriplets(t.begin(), t.end());
  p.data.A.makeCompressed();
  return p;
}

}  // namespace oracle

#endif
