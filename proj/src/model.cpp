#include "ricov/model.hpp"

#include <cmath>

#include "ricov/core.hpp"

namespace ricov {

std::string to_string(InteractionVariant v) {
  switch (v) {
    case InteractionVariant::kIidIid: return "IID-IID";
    case InteractionVariant::kIcarIid: return "ICAR-IID";
    case InteractionVariant::kIidRw2: return "IID-RW2";
    case InteractionVariant::kIcarRw2: return "ICAR-RW2";
    case InteractionVariant::kIidAr1: return "IID-AR1";
    case InteractionVariant::kIcarAr1: return "ICAR-AR1";
  }
  return "?";
}

InteractionVariant parse_variant(const std::string& name) {
  for (auto v : kAllVariants)
    if (to_string(v) == name) return v;
  throw InputError("unknown interaction variant '" + name + "'");
}

StructureKind space_factor(InteractionVariant v) {
  switch (v) {
    case InteractionVariant::kIcarIid:
    case InteractionVariant::kIcarRw2:
    case InteractionVariant::kIcarAr1: return StructureKind::kIcar;
    default: return StructureKind::kIid;
  }
}

StructureKind time_factor(InteractionVariant v) {
  switch (v) {
    case InteractionVariant::kIidRw2:
    case InteractionVariant::kIcarRw2: return StructureKind::kRw2;
    case InteractionVariant::kIidAr1:
    case InteractionVariant::kIcarAr1: return StructureKind::kAr1;
    default: return StructureKind::kIid;
  }
}

PcPrecisionPrior PriorSettings::interaction_prior(InteractionVariant v) const {
  if (interaction) return *interaction;
  if (v == InteractionVariant::kIidIid) return {1.0, 0.01};
  return {2.0, 0.01};
}

void ModelSpec::validate() const {
  if (num_areas < 1 || num_cohorts < 1 || num_surveys < 1)
    throw InputError("model dimensions I, B, S must all be >= 1");
  for (const auto* p : {&priors.icar, &priors.space_iid, &priors.rw2, &priors.time_iid,
                        &priors.survey})
    p->validate();
  priors.interaction_prior(variant).validate();
  if (has_rho(variant)) priors.rho.validate();
  if (!(priors.fixed_effect_precision > 0))
    throw InputError("fixed_effect_precision must be > 0");
}

void Hyperparameters::validate() const {
  for (double s : sigmas())
    if (!(s > 0)) throw InputError("all sigma hyperparameters must be > 0");
  if (rho_phi && !(std::abs(*rho_phi) < 1)) throw InputError("rho_phi must lie in (-1,1)");
}

VectorXd to_internal(const Hyperparameters& h) {
  h.validate();
  const auto s = h.sigmas();
  VectorXd psi(h.rho_phi ? 7 : 6);
  for (int k = 0; k < 6; ++k) psi[k] = -2.0 * std::log(s[k]);
  if (h.rho_phi) psi[6] = logit((*h.rho_phi + 1.0) / 2.0);
  return psi;
}

Hyperparameters from_internal(std::span<const double> psi, bool with_rho) {
  Hyperparameters h;
  auto sd = [&](int k) { return std::exp(-0.5 * psi[k]); };
  h.sigma_alpha = sd(0);
  h.sigma_gamma = sd(1);
  h.sigma_delta = sd(2);
  h.sigma_tau = sd(3);
  h.sigma_phi = sd(4);
  h.sigma_epsilon = sd(5);
  if (with_rho) h.rho_phi = 2.0 * expit(psi[6]) - 1.0;
  return h;
}

LatentLayout build_layout(const ModelSpec& spec) {
  spec.validate();
  LatentLayout l;
  l.num_areas = spec.num_areas;
  l.num_cohorts = spec.num_cohorts;
  l.num_surveys = spec.num_surveys;
  l.beta0 = 0;
  l.beta1 = 1;
  l.alpha = 2;
  l.gamma = l.alpha + spec.num_areas;
  l.delta = l.gamma + spec.num_areas;
  l.tau = l.delta + spec.num_cohorts;
  l.phi = l.tau + spec.num_cohorts;
  l.epsilon = l.phi + spec.num_areas * spec.num_cohorts;
  l.total = l.epsilon + spec.num_surveys;
  return l;
}

std::vector<LatentBlock> LatentLayout::blocks() const {
  return {{"beta0", beta0, 1},
          {"beta1", beta1, 1},
          {"alpha (ICAR)", alpha, num_areas},
          {"gamma (space IID)", gamma, num_areas},
          {"delta (RW2)", delta, num_cohorts},
          {"tau (time IID)", tau, num_cohorts},
          {"phi (space x time)", phi, num_areas * num_cohorts},
          {"epsilon (survey)", epsilon, num_surveys}};
}

IndexMaps::IndexMaps(std::vector<std::string> areas, std::vector<std::string> surveys)
    : area_ids(std::move(areas)), survey_ids(std::move(surveys)) {
  for (std::size_t i = 0; i < area_ids.size(); ++i) {
    if (!area_index.emplace(area_ids[i], static_cast<int>(i)).second)
      throw InputError("duplicate area id '" + area_ids[i] + "'");
  }
  for (std::size_t s = 0; s < survey_ids.size(); ++s) {
    if (!survey_index.emplace(survey_ids[s], static_cast<int>(s)).second)
      throw InputError("duplicate survey id '" + survey_ids[s] + "'");
  }
}

SpMat build_observation_matrix(std::span<const CellEstimate> cells, const LatentLayout& layout,
                               const IndexMaps& maps) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(cells.size() * 8);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto& c = cells[r];
    const auto ai = maps.area_index.find(c.area_id);
    if (ai == maps.area_index.end()) throw InputError("unknown area id '" + c.area_id + "'");
    const auto si = maps.survey_index.find(c.survey_id);
    if (si == maps.survey_index.end())
      throw InputError("unknown survey id '" + c.survey_id + "'");
    if (c.cohort_index < 1 || c.cohort_index > layout.num_cohorts)
      throw InputError("cohort index " + std::to_string(c.cohort_index) + " outside 1.." +
                       std::to_string(layout.num_cohorts));
    const int i = ai->second, b = c.cohort_index - 1, s = si->second;
    const int row = static_cast<int>(r);
    t.emplace_back(row, layout.beta0, 1.0);
    t.emplace_back(row, layout.beta1, static_cast<double>(c.sia_indicator));
    t.emplace_back(row, layout.alpha + i, 1.0);
    t.emplace_back(row, layout.gamma + i, 1.0);
    t.emplace_back(row, layout.delta + b, 1.0);
    t.emplace_back(row, layout.tau + b, 1.0);
    t.emplace_back(row, layout.phi_index(i, b), 1.0);
    t.emplace_back(row, layout.epsilon + s, 1.0);
  }
  SpMat A(static_cast<Eigen::Index>(cells.size()), layout.total);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

SpaceTimeModel::SpaceTimeModel(ModelSpec spec, AdjacencyGraph graph)
    : spec_(std::move(spec)), graph_(std::move(graph)), layout_(build_layout(spec_)) {
  if (graph_.num_areas != spec_.num_areas)
    throw InputError("adjacency graph has " + std::to_string(graph_.num_areas) +
                     " areas, model expects " + std::to_string(spec_.num_areas));
  icar_ = scale_structured(structure_matrix(StructureKind::kIcar, spec_.num_areas, &graph_),
                           &graph_);
  rw2_ = scale_structured(structure_matrix(StructureKind::kRw2, spec_.num_cohorts));
  interaction_ = interaction_precision(space_factor(spec_.variant), time_factor(spec_.variant),
                                       spec_.num_areas, spec_.num_cohorts, graph_, 0.0);

  const int n = layout_.total;
  std::vector<Eigen::Triplet<double>> t;
  int row = 0;
  auto add = [&](const VectorXd& v, int offset, bool friendly) {
    for (int j = 0; j < v.size(); ++j)
      if (v[j] != 0.0) t.emplace_back(row, offset + j, v[j]);
    constraints_.fill_friendly.push_back(friendly);
    ++row;
  };
  for (const auto& v : icar_.null_space_basis) add(v, layout_.alpha, true);
  add(VectorXd::Ones(spec_.num_cohorts), layout_.delta, true);  // sum only
  for (const auto& c : interaction_.constraints) add(c.coef, layout_.phi, c.fill_friendly);
  constraints_.C.resize(row, n);
  constraints_.C.setFromTriplets(t.begin(), t.end());
  constraints_.C.makeCompressed();

  fixed_log_pdet_ = 2.0 * std::log(spec_.priors.fixed_effect_precision) + icar_.log_pdet +
                    rw2_.log_pdet;
}

std::vector<std::string> SpaceTimeModel::hyper_names() const {
  std::vector<std::string> names = {"log_prec_alpha", "log_prec_gamma", "log_prec_delta",
                                    "log_prec_tau",   "log_prec_phi",   "log_prec_epsilon"};
  if (has_rho(spec_.variant)) names.emplace_back("logit_rho_phi");
  return names;
}

std::vector<double> SpaceTimeModel::natural_hyper(std::span<const double> psi) const {
  const auto h = from_internal(psi, has_rho(spec_.variant));
  const auto s = h.sigmas();
  std::vector<double> out(s.begin(), s.end());
  if (h.rho_phi) out.push_back(*h.rho_phi);
  return out;
}

void SpaceTimeModel::place(std::vector<Eigen::Triplet<double>>& t, const SpMat& block,
                           int offset, double scale) const {
  for (int k = 0; k < block.outerSize(); ++k)
    for (SpMat::InnerIterator it(block, k); it; ++it)
      t.emplace_back(offset + static_cast<int>(it.row()), offset + static_cast<int>(it.col()),
                     scale * it.value());
}

PriorPrecision SpaceTimeModel::prior_precision(std::span<const double> psi) const {
  if (static_cast<int>(psi.size()) != hyper_dim())
    throw InputError("hyperparameter vector has wrong length");
  const auto& L = layout_;
  const int I = L.num_areas, B = L.num_cohorts, S = L.num_surveys;
  const double fe = spec_.priors.fixed_effect_precision;

  InteractionStructure rebuilt;
  const InteractionStructure* inter = &interaction_;
  if (has_rho(spec_.variant)) {
    const double rho = 2.0 * expit(psi[6]) - 1.0;
    rebuilt = interaction_precision(space_factor(spec_.variant), time_factor(spec_.variant), I,
                                    B, graph_, rho);
    inter = &rebuilt;
  }

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 + icar_.Q.nonZeros() + rw2_.Q.nonZeros() + inter->structure.Q.nonZeros() +
            2 * I + B + S);
  t.emplace_back(L.beta0, L.beta0, fe);
  t.emplace_back(L.beta1, L.beta1, fe);
  place(t, icar_.Q, L.alpha, std::exp(psi[0]));
  for (int i = 0; i < I; ++i) t.emplace_back(L.gamma + i, L.gamma + i, std::exp(psi[1]));
  place(t, rw2_.Q, L.delta, std::exp(psi[2]));
  for (int b = 0; b < B; ++b) t.emplace_back(L.tau + b, L.tau + b, std::exp(psi[3]));
  place(t, inter->structure.Q, L.phi, std::exp(psi[4]));
  for (int s = 0; s < S; ++s) t.emplace_back(L.epsilon + s, L.epsilon + s, std::exp(psi[5]));

  PriorPrecision out;
  out.Q.resize(L.total, L.total);
  out.Q.setFromTriplets(t.begin(), t.end());
  out.Q.makeCompressed();
  out.intrinsic = true;
  out.rank = 2 + icar_.rank() + I + rw2_.rank() + B + inter->structure.rank() + S;
  out.log_pdet = fixed_log_pdet_ + inter->structure.log_pdet + icar_.rank() * psi[0] +
                 I * psi[1] + rw2_.rank() * psi[2] + B * psi[3] +
                 inter->structure.rank() * psi[4] + S * psi[5];
  return out;
}

double SpaceTimeModel::log_hyperprior(std::span<const double> psi) const {
  const auto& p = spec_.priors;
  double lp = pc_prior_logdensity_logprec(psi[0], p.icar) +
              pc_prior_logdensity_logprec(psi[1], p.space_iid) +
              pc_prior_logdensity_logprec(psi[2], p.rw2) +
              pc_prior_logdensity_logprec(psi[3], p.time_iid) +
              pc_prior_logdensity_logprec(psi[4], p.interaction_prior(spec_.variant)) +
              pc_prior_logdensity_logprec(psi[5], p.survey);
  if (has_rho(spec_.variant)) {
    // rho = 2 expit(r) - 1, d rho / d r = 2 expit(r) (1 - expit(r))
    const double e = expit(psi[6]);
    lp += pc_prior_correlation_logdensity(2.0 * e - 1.0, p.rho) +
          std::log(2.0 * e * (1.0 - e));
  }
  return lp;
}

VectorXd SpaceTimeModel::initial_hyper() const {
  Hyperparameters h;
  h.sigma_alpha = h.sigma_gamma = h.sigma_delta = h.sigma_tau = h.sigma_phi =
      h.sigma_epsilon = 0.5;
  if (has_rho(spec_.variant)) h.rho_phi = 0.5;
  return to_internal(h);
}

AssembledPrior joint_prior_precision(const ModelSpec& spec, const Hyperparameters& hyper,
                                     const AdjacencyGraph& graph) {
  if (has_rho(spec.variant) != hyper.rho_phi.has_value())
    throw InputError("rho_phi must be given exactly for AR1 interaction variants");
  const SpaceTimeModel model(spec, graph);
  const VectorXd psi = to_internal(hyper);
  auto p = model.prior_precision(std::span<const double>(psi.data(), psi.size()));
  return {std::move(p.Q), model.constraints(), p.log_pdet, p.rank};
}

}  // namespace ricov
