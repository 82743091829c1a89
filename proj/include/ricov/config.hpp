#ifndef RICOV_CONFIG_HPP
#define RICOV_CONFIG_HPP

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ricov/cohort.hpp"
#include "ricov/design.hpp"
#include "ricov/inference.hpp"
#include "ricov/model.hpp"
#include "ricov/simulate.hpp"

namespace ricov {

inline constexpr const char* kToolVersion = "ricov 1.0.0";

struct SimulationSettings {
  std::string scenario = "small";  // small | nigeria
  int num_surveys = 3;             // small scenario only
  std::optional<InteractionVariant> truth_variant;
  std::optional<double> beta1;
};

// One JSON document governs every subcommand; unknown keys are rejected.
struct RunConfig {
  CohortGrid grid{1201, 6, 38};
  int ri_age_months = 9;
  DesignOptions design;
  InteractionVariant variant = InteractionVariant::kIcarAr1;
  PriorSettings priors;
  ExploreOptions explore;
  int samples = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  SimulationSettings simulation;

  nlohmann::json canonical;  // normalized form, hashed into the manifest
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

SimConfig simulation_config(const RunConfig& c);

// Identifies a run: the hash covers the tool version, the normalized config,
// the seed and the input digests, but not the timestamps.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> inputs;  // name, sha256
  std::uint64_t seed = 0;
  std::string started, finished;

  void add_input(const std::string& path);
  std::string hash() const;
  nlohmann::json to_json() const;
};

RunManifest make_manifest(const RunConfig& config, const std::string& subcommand);

std::string utc_timestamp();

}  // namespace ricov

#endif
