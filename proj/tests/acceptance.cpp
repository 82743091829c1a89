// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--criterion N]... [--replicates R] [--seed S]
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <unsupported/Eigen/KroneckerProduct>

#include "oracles.hpp"
#include "random_models.hpp"
#include "refit.hpp"
#include "ricov/assessment.hpp"
#include "ricov/core.hpp"
#include "ricov/design.hpp"
#include "ricov/fit.hpp"
#include "ricov/gmrf.hpp"
#include "ricov/simulate.hpp"

using namespace ricov;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

Verdict odds_reporting() {
  // 1000 draws whose nearest-rank 2.5% and 97.5% points are 0.29 and 0.32
  const LatentLayout layout = build_layout({});
  MatrixXd samples = MatrixXd::Zero(layout.total, 1000);
  for (int m = 0; m < 1000; ++m) samples(layout.beta1, m) = 0.29 + (m - 24) * (0.03 / 950);
  const auto fe = fixed_effects(samples, layout);
  const std::string lo = fmt("%.3f", fe[2].lower95), hi = fmt("%.3f", fe[2].upper95);
  const std::string text = odds_statement(fe[1].lower95, fe[1].upper95);
  const bool ok = lo == "1.336" && hi == "1.377" && text == "33.6% -- 37.7% higher" &&
                  fmt("%.3f", odds_multiplier(0.29)) == "1.336" &&
                  fmt("%.3f", odds_multiplier(0.32)) == "1.377";
  return {ok, "exp_beta1 interval " + lo + " - " + hi + ", \"" + text + "\""};
}

// ---------------------------------------------------------------- 2

Verdict direct_estimates(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst_p = 0, worst_v = 0;
  for (int r = 0; r < 500; ++r) {
    const auto cell = oracle::random_cell(rng);
    worst_p = std::max(worst_p, std::abs(ht_estimate(cell).p_hat - oracle::ht(cell.children)));
    worst_v = std::max(worst_v, std::abs(design_variance(cell) -
                                         oracle::design_variance(cell.children, false)));
  }
  return {worst_p <= 1e-12 && worst_v <= 1e-12,
          fmt("500 cells, max |dp| %.2e, max |dv| %.2e", worst_p, worst_v)};
}

// ---------------------------------------------------------------- 3

Verdict gmrf_structures(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(3, 50);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  double worst_det = 0, worst_null = 0, worst_ar1 = 0;
  int rank_errors = 0, cases = 0;
  auto check = [&](const StructureMatrix& s, const std::vector<VectorXd>& basis) {
    const auto sp = oracle::spectrum(MatrixXd(s.Q));
    worst_det = std::max(worst_det, std::abs(sp.log_pdet - s.log_pdet));
    if (sp.rank != s.rank() || static_cast<int>(basis.size()) != s.size() - sp.rank) {
      ++rank_errors;
      return;
    }
    MatrixXd B(s.size(), static_cast<int>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) B.col(static_cast<int>(j)) = basis[j];
    worst_null = std::max(worst_null,
                          (oracle::projector(B) - oracle::projector(sp.null_space)).norm());
    ++cases;
  };
  for (int r = 0; r < 40; ++r) {
    const int n = dim(rng);
    const auto g = oracle::random_graph(n, rng);
    for (bool scaled : {false, true}) {
      auto icar = structure_matrix(StructureKind::kIcar, n, &g);
      auto rw2 = structure_matrix(StructureKind::kRw2, n);
      auto ar1 = structure_matrix(StructureKind::kAr1, n, nullptr, u(rng));
      if (scaled) {
        icar = scale_structured(icar, &g);
        rw2 = scale_structured(rw2);
        ar1 = scale_structured(ar1);
      }
      check(icar, icar.null_space_basis);
      check(rw2, rw2.null_space_basis);
      check(ar1, ar1.null_space_basis);
    }
    const double rho = u(rng);
    const auto ar1 = structure_matrix(StructureKind::kAr1, n, nullptr, rho);
    const MatrixXd S = MatrixXd(ar1.Q).inverse();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        worst_ar1 = std::max(worst_ar1, std::abs(S(i, j) - std::pow(rho, std::abs(i - j))));
  }
  // interactions up to 49 = 7 x 7
  for (int r = 0; r < 20; ++r) {
    const int I = std::uniform_int_distribution<int>(2, 7)(rng);
    const int B = std::uniform_int_distribution<int>(3, 7)(rng);
    const auto g = oracle::random_graph(I, rng);
    for (auto sk : {StructureKind::kIid, StructureKind::kIcar})
      for (auto tk : {StructureKind::kIid, StructureKind::kRw2, StructureKind::kAr1}) {
        const auto in = interaction_precision(sk, tk, I, B, g, u(rng));
        std::vector<VectorXd> basis;
        for (const auto& c : in.constraints) basis.push_back(c.coef);
        check(in.structure, basis);
      }
  }
  const bool ok = rank_errors == 0 && worst_det < 1e-8 && worst_null < 1e-8 && worst_ar1 < 1e-8;
  return {ok, fmt("%d structures, max |dlogdet| %.2e, null-space projector error %.2e, "
                  "AR1 inverse error %.2e, rank errors %d",
                  cases, worst_det, worst_null, worst_ar1, rank_errors)};
}

// ---------------------------------------------------------------- 4

Verdict gaussian_posterior(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst_mean = 0, worst_cov = 0;
  for (int r = 0; r < 100; ++r) {
    const auto m = oracle::random_model(rng, r % 2 == 1, 30);
    const MatrixXd Q(m.Q), A(m.A), C(m.constraints.C);
    const auto dense = oracle::constrained_posterior(Q, C, A, m.theta, m.V);
    const auto post = conditional_posterior(m.Q, m.constraints, m.A, m.theta, m.V);
    worst_mean = std::max(worst_mean, (post.mean() - dense.mean).cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, (post.covariance() - dense.cov).cwiseAbs().maxCoeff());
  }
  double worst_lml = 0;
  for (double tau : {0.05, 0.5, 1.0, 4.0, 30.0})
    for (double y : {-2.1, -0.4, 0.0, 1.3, 3.7})
      for (double V : {0.1, 1.0, 2.5}) {
        oracle::RandomModel m;
        m.Q = MatrixXd::Identity(1, 1).sparseView();
        m.A = m.Q;
        m.theta = VectorXd::Constant(1, y);
        m.V = VectorXd::Constant(1, V);
        m.rank = 1;
        const oracle::ScaledModel model(m);
        const double psi = std::log(tau);
        const double got = log_marginal_likelihood(model, {&psi, 1}, model.data());
        worst_lml = std::max(worst_lml, std::abs(got - log_normal_pdf(y, 0.0, V + 1.0 / tau)));
      }
  const bool ok = worst_mean < 1e-8 && worst_cov < 1e-8 && worst_lml < 1e-10;
  return {ok, fmt("100 models, max |dmean| %.2e, max |dcov| %.2e; scalar log marginal %.2e",
                  worst_mean, worst_cov, worst_lml)};
}

// ---------------------------------------------------------------- 5

Verdict loo_downdating(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  int cells = 0;
  for (int r = 0; r < 12; ++r) {
    const auto v = kAllVariants[static_cast<std::size_t>(r % 6)];
    const int C = std::uniform_int_distribution<int>(6, 20)(rng);
    const auto p = oracle::small_problem(v, C, rng);
    const SpaceTimeModel model(p.spec, p.graph);
    ExploreOptions opt;
    opt.points_per_dim = 3;
    const auto hp = explore_hyper(model, p.data, opt);
    const auto t = pointwise_terms(PredictorMixture::from(hp), p.data);
    for (int c = 0; c < C; ++c) {
      worst = std::max(worst, std::abs(t.neg_log_cpo[c] -
                                       oracle::refit_neg_log_cpo(model, p.data, hp.points, c)));
      ++cells;
    }
  }
  return {worst < 1e-8, fmt("%d left-out cells over 12 models, max |d(-log CPO)| %.2e", cells,
                            worst)};
}

// ---------------------------------------------------------------- 6, 7

struct Direct {
  Truth truth;
  std::vector<CellEstimate> estimates;
};

Direct simulate_direct(const SimConfig& sim) {
  Direct d;
  d.truth = simulate_truth(sim);
  const auto kids = simulate_survey(d.truth, sim);
  const auto built = build_cells(kids, sim.calendar, sim.grid, sim.ri_age_months);
  d.estimates = estimate_cells(built.cells).estimates;
  return d;
}

FitResult fit_variant(const SimConfig& sim, std::vector<CellEstimate> est, InteractionVariant v) {
  std::set<std::string> surveys;
  for (const auto& e : est) surveys.insert(e.survey_id);
  ModelSpec spec;
  spec.variant = v;
  spec.num_areas = sim.graph.num_areas;
  spec.num_cohorts = sim.grid.num_cohorts;
  spec.num_surveys = static_cast<int>(surveys.size());
  const IndexMaps maps(sim.areas(), {surveys.begin(), surveys.end()});
  return fit_model(spec, sim.graph, maps, std::move(est));
}

struct Summary {
  std::vector<PosteriorSummary> ri;
  double beta1_median = 0;
};

Summary summarize(const FitResult& fit, std::uint64_t seed) {
  const SpaceTimeModel model(fit.spec, fit.graph);
  PosteriorOptions po;
  po.augment_all = fit.hyper.augment_all;
  const auto samples = sample_posterior(model, fit.data, fit.hyper.points, 1000, seed, po);
  return {ri_coverage(samples, model.layout(), fit.maps.area_ids),
          fixed_effects(samples, model.layout())[1].median};
}

double rmse(const std::vector<PosteriorSummary>& ri, const Truth& truth) {
  double s = 0;
  for (const auto& r : ri) {
    const int i = std::stoi(r.area_id.substr(1)) - 1;
    const double d = r.median - truth.p_ri(i, r.cohort - 1);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(ri.size()));
}

Verdict small_scenario_recovery(std::uint64_t seed, int replicates) {
  long covered = 0, total = 0;
  double beta1 = 0;
  int improved = 0;
  for (int r = 0; r < replicates; ++r) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(r);
    const auto three = small_scenario(s, 3), one = small_scenario(s, 1);
    const auto d3 = simulate_direct(three), d1 = simulate_direct(one);
    const auto f3 = summarize(fit_variant(three, d3.estimates, InteractionVariant::kIcarAr1), s);
    const auto f1 = summarize(fit_variant(one, d1.estimates, InteractionVariant::kIcarAr1), s);
    for (const auto& row : f3.ri) {
      const int i = std::stoi(row.area_id.substr(1)) - 1;
      const double p = d3.truth.p_ri(i, row.cohort - 1);
      covered += row.lower95 <= p && p <= row.upper95;
      ++total;
    }
    beta1 += f3.beta1_median;
    const double e3 = rmse(f3.ri, d3.truth), e1 = rmse(f1.ri, d1.truth);
    improved += e3 < e1;
    std::cerr << fmt("  replicate %d: beta1 median %.3f, RMSE S=1 %.4f, S=3 %.4f\n", r + 1,
                     f3.beta1_median, e1, e3);
  }
  const double cov = static_cast<double>(covered) / static_cast<double>(total);
  const double b = beta1 / replicates;
  const double frac = static_cast<double>(improved) / replicates;
  const bool a_ok = cov >= 0.88 && cov <= 0.99;
  const bool b_ok = std::abs(b - 0.3) <= 0.1;
  const bool c_ok = frac >= 0.8;
  return {a_ok && b_ok && c_ok,
          fmt("%d replicates: (a) coverage %.3f %s, (b) mean beta1 median %.3f %s, "
              "(c) RMSE improves in %.0f%% %s",
              replicates, cov, a_ok ? "ok" : "FAIL", b, b_ok ? "ok" : "FAIL", 100 * frac,
              c_ok ? "ok" : "FAIL")};
}

Verdict nigeria_scale(std::uint64_t seed, int replicates) {
  double slowest = 0;
  int wins = 0;
  std::string slowest_variant;
  for (int r = 0; r < replicates; ++r) {
    const auto sim = nigeria_scenario(seed + static_cast<std::uint64_t>(r));
    const auto d = simulate_direct(sim);
    double best = INFINITY;
    InteractionVariant best_v{};
    std::string line = fmt("  replicate %d:", r + 1);
    for (auto v : kAllVariants) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto fit = fit_variant(sim, d.estimates, v);
      const auto report = assess(fit.hyper, fit.data);
      const double secs = seconds_since(t0);
      if (secs > slowest) {
        slowest = secs;
        slowest_variant = to_string(v);
      }
      if (report.dic < best) {
        best = report.dic;
        best_v = v;
      }
      line += fmt(" %s DIC %.1f (%.0fs)", to_string(v).c_str(), report.dic, secs);
    }
    wins += best_v == InteractionVariant::kIcarAr1;
    std::cerr << line << "\n";
  }
  const double frac = static_cast<double>(wins) / replicates;
  const bool ok = slowest < 600 && frac >= 0.6;
  return {ok, fmt("%d replicates: slowest fit+assess %.0f s (%s), ICAR-AR1 lowest DIC in "
                  "%d/%d",
                  replicates, slowest, slowest_variant.c_str(), wins, replicates)};
}

// ---------------------------------------------------------------- 8

Verdict cohort_width(std::uint64_t seed) {
  bool ok = true;
  std::string detail;
  for (int r = 0; r < 5; ++r) {
    const auto sim = nigeria_scenario(seed + static_cast<std::uint64_t>(r));
    const auto kids = simulate_survey(simulate_truth(sim), sim);
    auto count = [&](const CohortGrid& g) {
      long n = 0;
      for (const auto& c : build_cells(kids, sim.calendar, g, sim.ri_age_months).cells)
        n += static_cast<long>(c.children.size());
      return n;
    };
    const long six = count({sim.grid.origin_cmc, 6, 38}), twelve = count({sim.grid.origin_cmc, 12, 19});
    ok = ok && twelve <= six;
    detail += fmt("%s%ld <= %ld", r ? ", " : "12-month vs 6-month eligible children: ", twelve, six);
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> which;
  int replicates = 0;
  std::uint64_t seed = 20240601;
  app.add_option("--criterion", which, "criteria to run (default: all)")
      ->check(CLI::Range(1, 8));
  app.add_option("--replicates", replicates, "override the replicate count of 6 and 7");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

  bool all = true;
  for (int k : which) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      switch (k) {
        case 1: v = odds_reporting(); break;
        case 2: v = direct_estimates(seed); break;
        case 3: v = gmrf_structures(seed); break;
        case 4: v = gaussian_posterior(seed); break;
        case 5: v = loo_downdating(seed); break;
        case 6: v = small_scenario_recovery(seed, replicates ? replicates : 100); break;
        case 7: v = nigeria_scale(seed, replicates ? replicates : 20); break;
        case 8: v = cohort_width(seed); break;
      }
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << fmt("  [%.1fs]", seconds_since(t0)) << std::endl;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
