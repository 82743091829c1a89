#include "ricov/config.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <set>

#include "ricov/core.hpp"
#include "ricov/io.hpp"

namespace ricov {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.contains(k))
      throw InputError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
}

template <class T>
void read(const json& j, const std::string& key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: key '" + (where.empty() ? key : where + "." + key) +
                     "' has the wrong type");
  }
}

PcPrecisionPrior read_prior(const json& j, const std::string& where, PcPrecisionPrior p) {
  check_keys(j, where, {"u", "alpha"});
  read(j, "u", p.u, where);
  read(j, "alpha", p.alpha, where);
  try {
    p.validate();
  } catch (const InputError& e) {
    throw InputError("config: " + where + ": " + e.what());
  }
  return p;
}

json prior_json(const PcPrecisionPrior& p) { return {{"u", p.u}, {"alpha", p.alpha}}; }

}  // namespace

RunConfig parse_config(const json& j) {
  check_keys(j, "",
             {"variant", "cohort_len_months", "ri_age_months", "origin_cmc", "num_cohorts",
              "pc_priors", "rho_prior", "fixed_effect_precision", "lone_psu",
              "truncate_degenerate", "grid", "samples", "seed", "threads", "simulation"});
  RunConfig c;
  if (j.contains("variant")) {
    std::string v;
    read(j, "variant", v, "");
    c.variant = parse_variant(v);
  }
  read(j, "cohort_len_months", c.grid.cohort_len_months, "");
  read(j, "origin_cmc", c.grid.origin_cmc, "");
  read(j, "num_cohorts", c.grid.num_cohorts, "");
  c.grid.validate();
  read(j, "ri_age_months", c.ri_age_months, "");
  if (c.ri_age_months < 0) throw InputError("config: ri_age_months must be >= 0");

  if (j.contains("pc_priors")) {
    const auto& p = j.at("pc_priors");
    check_keys(p, "pc_priors",
               {"icar", "space_iid", "rw2", "time_iid", "interaction", "survey"});
    auto& pr = c.priors;
    if (p.contains("icar")) pr.icar = read_prior(p.at("icar"), "pc_priors.icar", pr.icar);
    if (p.contains("space_iid"))
      pr.space_iid = read_prior(p.at("space_iid"), "pc_priors.space_iid", pr.space_iid);
    if (p.contains("rw2")) pr.rw2 = read_prior(p.at("rw2"), "pc_priors.rw2", pr.rw2);
    if (p.contains("time_iid"))
      pr.time_iid = read_prior(p.at("time_iid"), "pc_priors.time_iid", pr.time_iid);
    if (p.contains("interaction"))
      pr.interaction = read_prior(p.at("interaction"), "pc_priors.interaction",
                                  pr.interaction_prior(c.variant));
    if (p.contains("survey")) pr.survey = read_prior(p.at("survey"), "pc_priors.survey", pr.survey);
  }
  if (j.contains("rho_prior")) {
    const auto& r = j.at("rho_prior");
    check_keys(r, "rho_prior", {"u0", "alpha0"});
    read(r, "u0", c.priors.rho.u0, "rho_prior");
    read(r, "alpha0", c.priors.rho.alpha0, "rho_prior");
    try {
      c.priors.rho.validate();
    } catch (const InputError& e) {
      throw InputError(std::string("config: rho_prior: ") + e.what());
    }
  }
  read(j, "fixed_effect_precision", c.priors.fixed_effect_precision, "");
  if (!(c.priors.fixed_effect_precision > 0))
    throw InputError("config: fixed_effect_precision must be > 0");

  if (j.contains("lone_psu")) {
    std::string v;
    read(j, "lone_psu", v, "");
    if (v == "certainty")
      c.design.lone_psu = LonePsuPolicy::kCertainty;
    else if (v == "grand_mean")
      c.design.lone_psu = LonePsuPolicy::kGrandMean;
    else
      throw InputError("config: lone_psu must be 'certainty' or 'grand_mean'");
  }
  read(j, "truncate_degenerate", c.design.truncate_degenerate, "");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid",
               {"points_per_dim", "half_width", "prune_sphere", "max_log_drop", "grad_tol",
                "max_iter", "hessian_step"});
    auto& e = c.explore;
    read(g, "points_per_dim", e.points_per_dim, "grid");
    read(g, "half_width", e.half_width, "grid");
    read(g, "prune_sphere", e.prune_sphere, "grid");
    read(g, "max_log_drop", e.max_log_drop, "grid");
    read(g, "grad_tol", e.grad_tol, "grid");
    read(g, "max_iter", e.max_iter, "grid");
    read(g, "hessian_step", e.hessian_step, "grid");
    if (e.points_per_dim < 1 || !(e.half_width >= 0) || !(e.max_log_drop > 0) ||
        !(e.grad_tol > 0) || e.max_iter < 1 || !(e.hessian_step > 0))
      throw InputError("config: grid settings out of range");
  }
  read(j, "samples", c.samples, "");
  if (c.samples < 1) throw InputError("config: samples must be >= 1");
  read(j, "seed", c.seed, "");
  read(j, "threads", c.threads, "");
  if (c.threads < 0) throw InputError("config: threads must be >= 0");
  c.explore.threads = c.threads;

  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    check_keys(s, "simulation", {"scenario", "num_surveys", "truth_variant", "beta1"});
    read(s, "scenario", c.simulation.scenario, "simulation");
    if (c.simulation.scenario != "small" && c.simulation.scenario != "nigeria")
      throw InputError("config: simulation.scenario must be 'small' or 'nigeria'");
    read(s, "num_surveys", c.simulation.num_surveys, "simulation");
    if (s.contains("truth_variant")) {
      std::string v;
      read(s, "truth_variant", v, "simulation");
      c.simulation.truth_variant = parse_variant(v);
    }
    if (s.contains("beta1")) {
      double b = 0;
      read(s, "beta1", b, "simulation");
      c.simulation.beta1 = b;
    }
  }
  c.canonical = to_json(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  const auto& pr = c.priors;
  json p = {{"icar", prior_json(pr.icar)},
            {"space_iid", prior_json(pr.space_iid)},
            {"rw2", prior_json(pr.rw2)},
            {"time_iid", prior_json(pr.time_iid)},
            {"interaction", prior_json(pr.interaction_prior(c.variant))},
            {"survey", prior_json(pr.survey)}};
  json sim = {{"scenario", c.simulation.scenario}, {"num_surveys", c.simulation.num_surveys}};
  if (c.simulation.truth_variant) sim["truth_variant"] = to_string(*c.simulation.truth_variant);
  if (c.simulation.beta1) sim["beta1"] = *c.simulation.beta1;
  return {{"variant", to_string(c.variant)},
          {"cohort_len_months", c.grid.cohort_len_months},
          {"origin_cmc", c.grid.origin_cmc},
          {"num_cohorts", c.grid.num_cohorts},
          {"ri_age_months", c.ri_age_months},
          {"pc_priors", p},
          {"rho_prior", {{"u0", pr.rho.u0}, {"alpha0", pr.rho.alpha0}}},
          {"fixed_effect_precision", pr.fixed_effect_precision},
          {"lone_psu", c.design.lone_psu == LonePsuPolicy::kCertainty ? "certainty" : "grand_mean"},
          {"truncate_degenerate", c.design.truncate_degenerate},
          {"grid",
           {{"points_per_dim", c.explore.points_per_dim},
            {"half_width", c.explore.half_width},
            {"prune_sphere", c.explore.prune_sphere},
            {"max_log_drop", c.explore.max_log_drop},
            {"grad_tol", c.explore.grad_tol},
            {"max_iter", c.explore.max_iter},
            {"hessian_step", c.explore.hessian_step}}},
          {"samples", c.samples},
          {"seed", c.seed},
          {"simulation", sim}};
}

SimConfig simulation_config(const RunConfig& c) {
  SimConfig s = c.simulation.scenario == "nigeria"
                    ? nigeria_scenario(c.seed)
                    : small_scenario(c.seed, c.simulation.num_surveys);
  if (c.simulation.truth_variant) s.truth_variant = *c.simulation.truth_variant;
  if (c.simulation.beta1) s.beta1 = *c.simulation.beta1;
  return s;
}

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(std::filesystem::path(path).filename().string(), sha256_file(path));
}

std::string RunManifest::hash() const {
  json j = {{"tool_version", tool_version}, {"config_hash", config_hash}, {"seed", seed}};
  json in = json::array();
  for (const auto& [name, digest] : inputs) in.push_back({name, digest});
  j["inputs"] = in;
  return sha256_hex(j.dump()).substr(0, 16);
}

json RunManifest::to_json() const {
  json in = json::array();
  for (const auto& [name, digest] : inputs) in.push_back({{"file", name}, {"sha256", digest}});
  return {{"hash", hash()},       {"tool_version", tool_version}, {"config_hash", config_hash},
          {"inputs", in},         {"seed", seed},                 {"started", started},
          {"finished", finished}};
}

RunManifest make_manifest(const RunConfig& config, const std::string& subcommand) {
  RunManifest m;
  json j = config.canonical;
  j["subcommand"] = subcommand;
  m.config_hash = sha256_hex(j.dump());
  m.seed = config.seed;
  m.started = utc_timestamp();
  return m;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ricov
