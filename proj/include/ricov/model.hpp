#ifndef RICOV_MODEL_HPP
#define RICOV_MODEL_HPP

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ricov/design.hpp"
#include "ricov/gmrf.hpp"
#include "ricov/latent_model.hpp"

namespace ricov {

enum class InteractionVariant { kIidIid, kIcarIid, kIidRw2, kIcarRw2, kIidAr1, kIcarAr1 };

inline constexpr std::array<InteractionVariant, 6> kAllVariants = {
    InteractionVariant::kIidIid, InteractionVariant::kIcarIid, InteractionVariant::kIidRw2,
    InteractionVariant::kIcarRw2, InteractionVariant::kIidAr1, InteractionVariant::kIcarAr1};

std::string to_string(InteractionVariant v);
InteractionVariant parse_variant(const std::string& name);
StructureKind space_factor(InteractionVariant v);
StructureKind time_factor(InteractionVariant v);
inline bool has_rho(InteractionVariant v) {
  return time_factor(v) == StructureKind::kAr1;
}

struct PriorSettings {
  PcPrecisionPrior icar{2.0, 0.01};
  PcPrecisionPrior space_iid{1.0, 0.01};
  PcPrecisionPrior rw2{2.0, 0.01};
  PcPrecisionPrior time_iid{1.0, 0.01};
  // nullopt: u = 2 for structured interactions, u = 1 for IID x IID
  std::optional<PcPrecisionPrior> interaction;
  PcPrecisionPrior survey{1.0, 0.01};
  PcCorrelationPrior rho{0.7, 0.7};
  double fixed_effect_precision = 0.001;

  PcPrecisionPrior interaction_prior(InteractionVariant v) const;
};

struct ModelSpec {
  InteractionVariant variant = InteractionVariant::kIcarAr1;
  int num_areas = 1;
  int num_cohorts = 1;
  int num_surveys = 1;
  PriorSettings priors;

  void validate() const;
};

/// Index ranges of the latent field: beta0, beta1, alpha (I), gamma (I),
/// delta (B), tau (B), phi (I*B, area-major), epsilon (S).
struct LatentLayout {
  int num_areas = 0, num_cohorts = 0, num_surveys = 0;
  int beta0 = 0, beta1 = 1;
  int alpha = 0, gamma = 0, delta = 0, tau = 0, phi = 0, epsilon = 0;
  int total = 0;

  int phi_index(int area, int cohort0) const { return phi + area * num_cohorts + cohort0; }
  std::vector<LatentBlock> blocks() const;
};

/// Component order used throughout: alpha, gamma, delta, tau, phi, epsilon.
inline constexpr std::array<const char*, 6> kComponentNames = {
    "ICAR", "Space IID", "RW2", "Time IID", "Space x Time", "Survey"};

struct Hyperparameters {
  double sigma_alpha = 1, sigma_gamma = 1, sigma_delta = 1, sigma_tau = 1, sigma_phi = 1,
         sigma_epsilon = 1;
  std::optional<double> rho_phi;

  std::array<double, 6> sigmas() const {
    return {sigma_alpha, sigma_gamma, sigma_delta, sigma_tau, sigma_phi, sigma_epsilon};
  }
  void validate() const;
};

/// Unconstrained parameterization: log precisions, then logit((rho+1)/2).
VectorXd to_internal(const Hyperparameters& h);
Hyperparameters from_internal(std::span<const double> psi, bool with_rho);

LatentLayout build_layout(const ModelSpec& spec);

/// Maps area/survey identifiers onto model indices.
struct IndexMaps {
  std::vector<std::string> area_ids;
  std::vector<std::string> survey_ids;
  std::map<std::string, int> area_index;
  std::map<std::string, int> survey_index;

  IndexMaps() = default;
  IndexMaps(std::vector<std::string> areas, std::vector<std::string> surveys);
};

/// One row per cell: ones at beta0, alpha_i, gamma_i, delta_b, tau_b,
/// phi_ib, epsilon_s and x at beta1 (x = 0 rows keep an explicit zero).
SpMat build_observation_matrix(std::span<const CellEstimate> cells, const LatentLayout& layout,
                               const IndexMaps& maps);

struct AssembledPrior {
  SpMat Q;
  ConstraintSet constraints;
  double log_pdet = 0;
  int rank = 0;
};

/// Block-diagonal prior precision for the given hyperparameters.
AssembledPrior joint_prior_precision(const ModelSpec& spec, const Hyperparameters& hyper,
                                     const AdjacencyGraph& graph);

// The space-time smoothing model as a LatentModel. Structure matrices are
// built once; only the AR1 factor is rebuilt when rho changes.
class SpaceTimeModel final : public LatentModel {
 public:
  SpaceTimeModel(ModelSpec spec, AdjacencyGraph graph);

  int latent_dim() const override { return layout_.total; }
  int hyper_dim() const override { return has_rho(spec_.variant) ? 7 : 6; }
  std::vector<std::string> hyper_names() const override;
  PriorPrecision prior_precision(std::span<const double> psi) const override;
  double log_hyperprior(std::span<const double> psi) const override;
  const ConstraintSet& constraints() const override { return constraints_; }
  VectorXd initial_hyper() const override;
  std::vector<LatentBlock> blocks() const override { return layout_.blocks(); }
  std::vector<double> natural_hyper(std::span<const double> psi) const override;

  const ModelSpec& spec() const { return spec_; }
  const LatentLayout& layout() const { return layout_; }
  const AdjacencyGraph& graph() const { return graph_; }

 private:
  void place(std::vector<Eigen::Triplet<double>>& t, const SpMat& block, int offset,
             double scale) const;

  ModelSpec spec_;
  AdjacencyGraph graph_;
  LatentLayout layout_;
  StructureMatrix icar_, rw2_;
  InteractionStructure interaction_;  // rho-independent variants
  ConstraintSet constraints_;
  double fixed_log_pdet_ = 0;  // hyper-independent part
};

}  // namespace ricov

#endif
