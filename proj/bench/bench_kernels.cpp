// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <set>

#include "ricov/assessment.hpp"
#include "ricov/design.hpp"
#include "ricov/fit.hpp"
#include "ricov/simulate.hpp"

using namespace ricov;

namespace {

struct Fixture {
  std::vector<EligibleCell> cells;
  FitResult fit;
  PredictorMixture mixture;
  std::vector<VectorXd> psis;

  Fixture() {
    const auto sim = small_scenario(11);
    const auto kids = simulate_survey(simulate_truth(sim), sim);
    cells = build_cells(kids, sim.calendar, sim.grid, sim.ri_age_months).cells;
    auto est = estimate_cells(cells).estimates;
    std::set<std::string> surveys;
    for (const auto& e : est) surveys.insert(e.survey_id);
    ModelSpec spec;
    spec.num_areas = sim.graph.num_areas;
    spec.num_cohorts = sim.grid.num_cohorts;
    spec.num_surveys = static_cast<int>(surveys.size());
    fit = fit_model(spec, sim.graph, IndexMaps(sim.areas(), {surveys.begin(), surveys.end()}),
                    std::move(est));
    mixture = PredictorMixture::from(fit.hyper);
    for (std::size_t k = 0; k < fit.hyper.points.size() && k < 64; ++k)
      psis.push_back(fit.hyper.points[k].psi);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_EstimateCells(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) ? estimate_cells(f.cells) : serial::estimate_cells(f.cells));
}

void BM_EvaluatePoints(benchmark::State& st) {
  const auto& f = fixture();
  const SpaceTimeModel model(f.fit.spec, f.fit.graph);
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0)
                                 ? evaluate_points(model, f.fit.data, f.psis, true, {})
                                 : serial::evaluate_points(model, f.fit.data, f.psis, true, {}));
}

void BM_SamplePosterior(benchmark::State& st) {
  const auto& f = fixture();
  const SpaceTimeModel model(f.fit.spec, f.fit.graph);
  for (auto _ : st)
    benchmark::DoNotOptimize(
        st.range(0) ? sample_posterior(model, f.fit.data, f.fit.hyper.points, 500, 3)
                    : serial::sample_posterior(model, f.fit.data, f.fit.hyper.points, 500, 3));
}

void BM_PointwiseTerms(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st)
    benchmark::DoNotOptimize(st.range(0) ? pointwise_terms(f.mixture, f.fit.data)
                                         : serial::pointwise_terms(f.mixture, f.fit.data));
}

}  // namespace

// argument 1: OpenMP kernel, 0: serial reference
BENCHMARK(BM_EstimateCells)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluatePoints)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SamplePosterior)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PointwiseTerms)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
