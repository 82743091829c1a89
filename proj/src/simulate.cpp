#include "ricov/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

#include "ricov/core.hpp"

namespace ricov {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

std::vector<std::string> SimConfig::areas() const {
  if (!area_ids.empty()) return area_ids;
  std::vector<std::string> out;
  for (int i = 0; i < graph.num_areas; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "A%02d", i + 1);
    out.emplace_back(buf);
  }
  return out;
}

void SimConfig::validate() const {
  grid.validate();
  if (graph.num_areas < 1) throw InputError("simulation: need at least one area");
  if (!area_ids.empty() && static_cast<int>(area_ids.size()) != graph.num_areas)
    throw InputError("simulation: area_ids does not match the graph");
  if (surveys.empty()) throw InputError("simulation: need at least one survey");
  for (const auto& s : surveys)
    if (s.min_age_months < 0 || s.max_age_months < s.min_age_months)
      throw InputError("simulation: bad age window for survey " + s.survey_id);
  for (const auto& e : calendar) ricov::validate(e);
  if (clusters_per_area < 1 || children_per_cluster < 1 || strata_per_area < 1)
    throw InputError("simulation: counts must be >= 1");
  if (strata_per_area > clusters_per_area)
    throw InputError("simulation: more strata than clusters per area");
  if (sigma_cluster < 0) throw InputError("simulation: sigma_cluster must be >= 0");
  for (double s : truth.sigmas())
    if (!(s >= 0)) throw InputError("simulation: truth sigmas must be >= 0");
  if (has_rho(truth_variant)) {
    if (!truth.rho_phi || !(std::abs(*truth.rho_phi) < 1))
      throw InputError("simulation: AR1 truth needs rho_phi in (-1,1)");
  }
}

namespace {

struct EigenFactor {
  VectorXd values;
  MatrixXd vectors;
};

EigenFactor eigen_of(const StructureMatrix& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es{MatrixXd(s.Q)};
  return {es.eigenvalues(), es.eigenvectors()};
}

VectorXd standard_normals(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

// sigma * Q^{+1/2} z, restricted to the non-null eigen-directions.
VectorXd draw_structured(const StructureMatrix& s, double sigma, std::mt19937_64& rng) {
  const auto e = eigen_of(s);
  const double tol = 1e-9 * e.values.cwiseAbs().maxCoeff();
  const VectorXd z = standard_normals(s.size(), rng);
  VectorXd x = VectorXd::Zero(s.size());
  for (int k = 0; k < s.size(); ++k)
    if (e.values[k] > tol) x += z[k] / std::sqrt(e.values[k]) * e.vectors.col(k);
  return sigma * x;
}

}  // namespace

Truth simulate_truth(const SimConfig& config) {
  config.validate();
  const int I = config.graph.num_areas, B = config.grid.num_cohorts;
  const auto& h = config.truth;
  auto rng = make_stream(config.seed, 0);

  Truth t;
  t.beta0 = config.beta0;
  t.beta1 = config.beta1;
  const auto icar = scale_structured(
      structure_matrix(StructureKind::kIcar, I, &config.graph), &config.graph);
  const auto rw2 = scale_structured(structure_matrix(StructureKind::kRw2, B));
  t.alpha = draw_structured(icar, h.sigma_alpha, rng);
  t.gamma = h.sigma_gamma * standard_normals(I, rng);
  t.delta = draw_structured(rw2, h.sigma_delta, rng);
  for (int b = 0; b < B; ++b) t.delta[b] += config.time_trend * (b - 0.5 * (B - 1));
  t.tau = h.sigma_tau * standard_normals(B, rng);

  const auto sk = space_factor(config.truth_variant), tk = time_factor(config.truth_variant);
  const auto space = scale_structured(structure_matrix(sk, I, &config.graph), &config.graph);
  const auto time = scale_structured(
      structure_matrix(tk, B, nullptr, has_rho(config.truth_variant) ? *h.rho_phi : 0.0));
  const auto es = eigen_of(space), et = eigen_of(time);
  const double tol =
      1e-9 * es.values.cwiseAbs().maxCoeff() * et.values.cwiseAbs().maxCoeff();
  const VectorXd z = standard_normals(I * B, rng);
  t.phi = MatrixXd::Zero(I, B);
  for (int a = 0; a < I; ++a)
    for (int c = 0; c < B; ++c) {
      const double lam = es.values[a] * et.values[c];
      if (lam <= tol) continue;
      t.phi += (z[a * B + c] / std::sqrt(lam)) * es.vectors.col(a) * et.vectors.col(c).transpose();
    }
  t.phi *= h.sigma_phi;
  t.epsilon = h.sigma_epsilon * standard_normals(static_cast<int>(config.surveys.size()), rng);

  t.mu.resize(I, B);
  t.p_ri.resize(I, B);
  for (int i = 0; i < I; ++i)
    for (int b = 0; b < B; ++b) {
      t.mu(i, b) = t.beta0 + t.alpha[i] + t.gamma[i] + t.delta[b] + t.tau[b] + t.phi(i, b);
      t.p_ri(i, b) = expit(t.mu(i, b));
    }
  return t;
}

int sia_exposure(int birth_cmc, int interview_cmc, const std::string& area_id,
                 const std::vector<SiaEvent>& calendar) {
  int count = 0;
  for (const auto& e : calendar) {
    if (!e.area_ids.contains(area_id)) continue;
    const int last_month = std::min(e.end_cmc, interview_cmc - 1);
    if (last_month < e.start_cmc) continue;
    // birth months with some campaign month at an eligible age
    if (birth_cmc >= e.start_cmc - e.max_age_months && birth_cmc <= last_month - e.min_age_months)
      ++count;
  }
  return count;
}

std::vector<ChildRecord> simulate_survey(const Truth& truth, const SimConfig& config) {
  config.validate();
  const auto areas = config.areas();
  const int I = config.graph.num_areas, len = config.grid.cohort_len_months;
  auto rng = make_stream(config.seed, 1);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<ChildRecord> out;
  for (std::size_t s = 0; s < config.surveys.size(); ++s) {
    const auto& plan = config.surveys[s];
    const int T = plan.interview_cmc;
    std::vector<int> cohorts;  // 0-based, whole birth range inside the age window
    for (int b = 0; b < config.grid.num_cohorts; ++b) {
      const int first = config.grid.origin_cmc + b * len, last = first + len - 1;
      if (T - last >= plan.min_age_months && T - first <= plan.max_age_months)
        cohorts.push_back(b);
    }
    if (cohorts.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick_cohort(0, cohorts.size() - 1);
    std::uniform_int_distribution<int> pick_month(0, len - 1);

    for (int i = 0; i < I; ++i)
      for (int c = 0; c < config.clusters_per_area; ++c) {
        const int stratum = c * config.strata_per_area / config.clusters_per_area;
        const double u = config.sigma_cluster * normal(rng);
        const double w = config.weights == WeightScheme::kVariable
                             ? std::exp(0.5 * normal(rng))
                             : 1.0;
        for (int k = 0; k < config.children_per_cluster; ++k) {
          const int b = cohorts[pick_cohort(rng)];
          ChildRecord r;
          r.survey_id = plan.survey_id;
          r.area_id = areas[i];
          r.stratum_id = areas[i] + "-h" + std::to_string(stratum + 1);
          r.cluster_id = plan.survey_id + "-" + areas[i] + "-c" + std::to_string(c + 1);
          r.weight = w;
          r.birth_cmc = config.grid.origin_cmc + b * len + pick_month(rng);
          r.interview_cmc = T;
          const int x = sia_exposure(r.birth_cmc, T, areas[i], config.calendar) > 0 ? 1 : 0;
          const double p = expit(truth.mu(i, b) + truth.beta1 * x + truth.epsilon[s] + u);
          r.mcv1 = unif(rng) < p ? 1 : 0;
          r.row = static_cast<long>(out.size()) + 1;
          out.push_back(std::move(r));
        }
      }
  }
  return out;
}

AdjacencyGraph nigeria_like_graph() {
  const int rows = 6, cols = 6;
  std::vector<std::pair<int, int>> edges = AdjacencyGraph::lattice(rows, cols).edges;
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      if ((r + c) % 2 == 0) edges.emplace_back(r * cols + c, (r + 1) * cols + c + 1);
  edges.emplace_back(36, 5);
  edges.emplace_back(36, 11);
  return AdjacencyGraph::from_edges(37, std::move(edges));
}

namespace {

Hyperparameters default_truth() {
  Hyperparameters h;
  h.sigma_alpha = 0.6;
  h.sigma_gamma = 0.2;
  h.sigma_delta = 0.3;
  h.sigma_tau = 0.1;
  h.sigma_phi = 0.4;
  h.sigma_epsilon = 0.1;
  h.rho_phi = 0.8;
  return h;
}

// A single-month campaign for ages 9-56 months in month origin + offset.
SiaEvent campaign(const std::string& id, int month, std::set<std::string> areas) {
  return {id, month, month, 9, 56, std::move(areas)};
}

}  // namespace

SimConfig small_scenario(std::uint64_t seed, int num_surveys) {
  if (num_surveys < 1 || num_surveys > 3) throw InputError("small scenario has 1-3 surveys");
  SimConfig c;
  c.graph = AdjacencyGraph::lattice(3, 3);
  c.grid = {1201, 6, 10};
  const int o = c.grid.origin_cmc;
  for (int s = 0; s < num_surveys; ++s)
    c.surveys.push_back({"S" + std::to_string(s + 1), o + 47 + 12 * s, 12, 47});
  const auto ids = c.areas();
  c.calendar.push_back(campaign("SIA1", o + 50, {ids[0], ids[2], ids[4], ids[6], ids[8]}));
  c.truth = default_truth();
  c.beta0 = 0.2;
  c.beta1 = 0.3;
  c.time_trend = 0.03;
  c.clusters_per_area = 5;
  c.children_per_cluster = 10;
  c.seed = seed;
  return c;
}

SimConfig nigeria_scenario(std::uint64_t seed) {
  SimConfig c;
  c.graph = nigeria_like_graph();
  c.grid = {1201, 6, 38};
  const int o = c.grid.origin_cmc;
  for (int s = 0; s < 9; ++s)
    c.surveys.push_back({"S" + std::to_string(s + 1), o + 47 + 24 * s, 12, 47});
  const auto ids = c.areas();
  std::set<std::string> north(ids.begin(), ids.begin() + 18), south(ids.begin() + 18, ids.end());
  for (int k = 0; k < 4; ++k)
    c.calendar.push_back(
        campaign("SIA" + std::to_string(k + 1), o + 62 + 48 * k, k % 2 == 0 ? north : south));
  c.truth = default_truth();
  c.truth.sigma_alpha = 0.7;
  c.truth.sigma_phi = 0.5;
  c.beta0 = -0.2;
  c.beta1 = 0.3;
  c.time_trend = 0.02;
  c.clusters_per_area = 8;
  c.children_per_cluster = 12;
  c.strata_per_area = 2;
  c.weights = WeightScheme::kVariable;
  c.seed = seed;
  return c;
}

}  // namespace ricov
