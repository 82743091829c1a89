// Command-line front end: process | direct | fit | predict | assess | simulate.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "ricov/assessment.hpp"
#include "ricov/config.hpp"
#include "ricov/core.hpp"
#include "ricov/fit.hpp"
#include "ricov/io.hpp"

namespace fs = std::filesystem;
using namespace ricov;

namespace {

struct Overrides {
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, samples, cohort_len;
};

RunConfig configure(const std::string& path, const Overrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    try {
      j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(path + ": " + e.what());
    }
  }
  if (!o.variant.empty()) j["variant"] = o.variant;
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["threads"] = *o.threads;
  if (o.samples) j["samples"] = *o.samples;
  if (o.cohort_len) j["cohort_len_months"] = *o.cohort_len;
  return parse_config(j);
}

void finish(RunManifest& m, const std::string& path) {
  m.finished = utc_timestamp();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << m.to_json().dump(2) << "\n";
}

std::string in_dir(const std::string& dir, const std::string& file) {
  fs::create_directories(dir);
  return (fs::path(dir) / file).string();
}

int run_process(const RunConfig& cfg, const std::string& children_path,
                const std::string& sia_path, const std::string& out_dir) {
  auto m = make_manifest(cfg, "process");
  m.add_input(children_path);
  m.add_input(sia_path);
  const auto h = m.hash();
  auto input = read_children(children_path);
  const auto calendar = read_sia_calendar(sia_path);
  auto built = build_cells(input.children, calendar, cfg.grid, cfg.ri_age_months);
  auto rejections = std::move(input.rejections);
  rejections.insert(rejections.end(), built.rejections.begin(), built.rejections.end());
  std::stable_sort(rejections.begin(), rejections.end(),
                   [](const auto& a, const auto& b) { return a.row < b.row; });
  write_cells(in_dir(out_dir, "cells.csv"), built.cells, h);
  write_rejections(in_dir(out_dir, "rejections.csv"), rejections, h);
  finish(m, in_dir(out_dir, "manifest.json"));
  long kept = 0;
  for (const auto& c : built.cells) kept += static_cast<long>(c.children.size());
  std::cerr << "process: " << built.cells.size() << " cells, " << kept << " children kept, "
            << rejections.size() << " rejected\n";
  return 0;
}

int run_direct(const RunConfig& cfg, const std::string& cells_path, const std::string& out_dir) {
  auto m = make_manifest(cfg, "direct");
  m.add_input(cells_path);
  const auto h = m.hash();
  const auto cells = read_cells(cells_path);
  const auto est = estimate_cells(cells, cfg.design);
  write_direct_estimates(in_dir(out_dir, "direct_estimates.csv"), est.estimates, h);
  write_degenerate(in_dir(out_dir, "degenerate_cells.csv"), est.excluded, h);
  finish(m, in_dir(out_dir, "manifest.json"));
  std::cerr << "direct: " << est.estimates.size() << " estimates, " << est.excluded.size()
            << " degenerate cells excluded\n";
  return 0;
}

int run_fit(const RunConfig& cfg, const std::string& direct_path, const std::string& adj_path,
            const std::string& out) {
  auto m = make_manifest(cfg, "fit");
  m.add_input(direct_path);
  m.add_input(adj_path);
  const auto h = m.hash();
  auto cells = read_direct_estimates(direct_path);
  const auto areas = read_adjacency(adj_path);
  std::set<std::string> surveys;
  for (const auto& c : cells) surveys.insert(c.survey_id);
  ModelSpec spec;
  spec.variant = cfg.variant;
  spec.num_areas = areas.graph.num_areas;
  spec.num_cohorts = cfg.grid.num_cohorts;
  spec.num_surveys = static_cast<int>(surveys.size());
  spec.priors = cfg.priors;
  const IndexMaps maps(areas.area_ids, {surveys.begin(), surveys.end()});
  const auto fit = fit_model(spec, areas.graph, maps, std::move(cells), cfg.explore);
  fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_fit(out, fit, h);
  finish(m, out + ".manifest.json");
  std::cerr << "fit: " << to_string(spec.variant) << ", " << fit.hyper.points.size()
            << " grid points, mode |grad| = " << fit.hyper.mode_gradient_norm << "\n";
  return 0;
}

int run_predict(const RunConfig& cfg, const std::string& fit_path, const std::string& out_dir) {
  auto m = make_manifest(cfg, "predict");
  m.add_input(fit_path);
  const auto h = m.hash();
  const auto fit = read_fit(fit_path);
  const SpaceTimeModel model(fit.spec, fit.graph);
  PosteriorOptions po = cfg.explore.posterior;
  po.augment_all = po.augment_all || fit.hyper.augment_all;
  const auto samples =
      sample_posterior(model, fit.data, fit.hyper.points, cfg.samples, cfg.seed, po, cfg.threads);
  write_ri_coverage(in_dir(out_dir, "ri_coverage.csv"),
                    ri_coverage(samples, model.layout(), fit.maps.area_ids), h);
  const auto fe = fixed_effects(samples, model.layout());
  write_fixed_effects(in_dir(out_dir, "fixed_effects.csv"), fe, h);
  write_hyper_posterior(in_dir(out_dir, "hyper_posterior.csv"), fit.hyper, h);
  finish(m, in_dir(out_dir, "manifest.json"));
  std::cerr << "predict: SIA odds multiplier exp(beta1) median " << fe[2].median << " ("
            << percent_higher(fe[1].median) << " higher odds)\n";
  return 0;
}

int run_assess(const RunConfig& cfg, const std::vector<std::string>& fits, const std::string& out) {
  auto m = make_manifest(cfg, "assess");
  for (const auto& f : fits) m.add_input(f);
  const auto h = m.hash();
  std::vector<AssessmentRow> rows;
  for (const auto& f : fits) {
    auto fit = read_fit(f);
    refresh_moments(fit, cfg.explore);
    rows.push_back({to_string(fit.spec.variant), assess(fit.hyper, fit.data, cfg.threads)});
  }
  fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_assessment(out, rows, h);
  finish(m, out + ".manifest.json");
  return 0;
}

int run_simulate(const RunConfig& cfg, const std::string& out_dir) {
  auto m = make_manifest(cfg, "simulate");
  const auto h = m.hash();
  const auto sim = simulation_config(cfg);
  const auto truth = simulate_truth(sim);
  const auto children = simulate_survey(truth, sim);
  const auto areas = sim.areas();
  write_children(in_dir(out_dir, "children.csv"), children, h);
  write_sia_calendar(in_dir(out_dir, "sia_calendar.csv"), sim.calendar, h);
  write_adjacency(in_dir(out_dir, "adjacency.csv"), areas, sim.graph, h);
  write_truth(in_dir(out_dir, "truth.csv"), areas, truth, h);
  finish(m, in_dir(out_dir, "manifest.json"));
  std::cerr << "simulate: " << children.size() << " children in " << sim.surveys.size()
            << " surveys\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-national routine-immunization coverage from household surveys"};
  app.require_subcommand(1);
  std::string config;
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("-c,--config", config, "JSON configuration file");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override config 'seed'");
    sub->add_option("--threads", o.threads, "override config 'threads'");
  };

  std::string children, sia, cells, direct, adjacency, fit_path, out, out_dir;
  std::vector<std::string> fits;

  auto* process = app.add_subcommand("process", "children + SIA calendar -> eligible cells");
  add_common(process, true);
  process->add_option("--children", children)->required()->check(CLI::ExistingFile);
  process->add_option("--sia", sia)->required()->check(CLI::ExistingFile);
  process->add_option("--cohort-len", o.cohort_len, "override config 'cohort_len_months'");
  process->add_option("-o,--out-dir", out_dir)->required();

  auto* dir = app.add_subcommand("direct", "cells -> design-based direct estimates");
  add_common(dir, true);
  dir->add_option("--cells", cells)->required()->check(CLI::ExistingFile);
  dir->add_option("-o,--out-dir", out_dir)->required();

  auto* fit = app.add_subcommand("fit", "direct estimates -> fitted space-time model");
  add_common(fit, true);
  fit->add_option("--direct", direct)->required()->check(CLI::ExistingFile);
  fit->add_option("--adjacency", adjacency)->required()->check(CLI::ExistingFile);
  fit->add_option("--variant", o.variant, "override config 'variant'");
  fit->add_option("-o,--out", out, "fit file (JSON)")->required();

  auto* predict = app.add_subcommand("predict", "fit -> RI coverage summaries");
  add_common(predict, false);
  predict->add_option("--fit", fit_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--samples", o.samples, "override config 'samples'");
  predict->add_option("-o,--out-dir", out_dir)->required();

  auto* assess_cmd = app.add_subcommand("assess", "fits -> DIC, WAIC, LCPO, variance shares");
  add_common(assess_cmd, false);
  assess_cmd->add_option("--fit", fits)->required()->check(CLI::ExistingFile);
  assess_cmd->add_option("-o,--out", out)->required();

  auto* simulate = app.add_subcommand("simulate", "synthetic inputs with known truth");
  add_common(simulate, true);
  simulate->add_option("-o,--out-dir", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = configure(config, o);
    if (*process) return run_process(cfg, children, sia, out_dir);
    if (*dir) return run_direct(cfg, cells, out_dir);
    if (*fit) return run_fit(cfg, direct, adjacency, out);
    if (*predict) return run_predict(cfg, fit_path, out_dir);
    if (*assess_cmd) return run_assess(cfg, fits, out);
    if (*simulate) return run_simulate(cfg, out_dir);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n" << e.trace();
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
