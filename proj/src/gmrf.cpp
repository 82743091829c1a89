#include "ricov/gmrf.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <unsupported/Eigen/KroneckerProduct>

#include "ricov/core.hpp"

namespace ricov {

AdjacencyGraph AdjacencyGraph::from_edges(int num_areas,
                                          std::vector<std::pair<int, int>> edges) {
  if (num_areas < 1) throw InputError("adjacency graph needs at least one area");
  for (auto& [a, b] : edges) {
    if (a == b) throw InputError("adjacency graph: self-loop at area " + std::to_string(a));
    if (a < 0 || b < 0 || a >= num_areas || b >= num_areas)
      throw InputError("adjacency graph: edge endpoint out of range");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return {num_areas, std::move(edges)};
}

AdjacencyGraph AdjacencyGraph::lattice(int rows, int cols) {
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(v, v + 1);
      if (r + 1 < rows) edges.emplace_back(v, v + cols);
    }
  return from_edges(rows * cols, std::move(edges));
}

std::vector<int> AdjacencyGraph::component_labels() const {
  // union-find
  std::vector<int> parent(num_areas);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> label(num_areas, -1), root_label(num_areas, -1);
  int next = 0;
  for (int v = 0; v < num_areas; ++v) {
    const int r = find(v);
    if (root_label[r] < 0) root_label[r] = next++;
    label[v] = root_label[r];
  }
  return label;
}

int AdjacencyGraph::num_components() const {
  const auto labels = component_labels();
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

const char* to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::kIcar: return "ICAR";
    case StructureKind::kRw2: return "RW2";
    case StructureKind::kAr1: return "AR1";
    case StructureKind::kIid: return "IID";
  }
  return "?";
}

namespace {

SpMat from_triplets(int n, const std::vector<Eigen::Triplet<double>>& t) {
  SpMat Q(n, n);
  Q.setFromTriplets(t.begin(), t.end());
  Q.makeCompressed();
  return Q;
}

// log pdet(Q) = log det(Q + C^T C) - log det(C C^T) when the rows of C span
// the null space of Q.
double log_pdet_via_null_space(const SpMat& Q, const std::vector<VectorXd>& null_basis) {
  const int n = static_cast<int>(Q.rows());
  const int k = static_cast<int>(null_basis.size());
  if (k == n) return 0.0;
  MatrixXd C(k, n);
  for (int j = 0; j < k; ++j) C.row(j) = null_basis[j].transpose();
  SpMat M = Q + (C.transpose() * C).sparseView();
  Eigen::SimplicialLLT<SpMat> chol(M);
  if (chol.info() != Eigen::Success)
    throw NumericalError("log pseudo-determinant: factorization failed");
  double logdet = 2.0 * chol.matrixL().nestedExpression().diagonal().array().log().sum();
  if (k > 0) {
    Eigen::LLT<MatrixXd> cc(C * C.transpose());
    logdet -= 2.0 * cc.matrixLLT().diagonal().array().log().sum();
  }
  return logdet;
}

StructureMatrix icar(int n, const AdjacencyGraph& graph) {
  if (graph.num_areas != n) throw InputError("ICAR size does not match graph");
  std::vector<Eigen::Triplet<double>> t;
  std::vector<double> degree(n, 0.0);
  for (const auto& [a, b] : graph.edges) {
    t.emplace_back(a, b, -1.0);
    t.emplace_back(b, a, -1.0);
    degree[a] += 1;
    degree[b] += 1;
  }
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, degree[i]);
  StructureMatrix s;
  s.kind = StructureKind::kIcar;
  s.Q = from_triplets(n, t);
  const auto labels = graph.component_labels();
  const int nc = graph.num_components();
  s.rank_deficiency = nc;
  for (int c = 0; c < nc; ++c) {
    VectorXd v = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
      if (labels[i] == c) v[i] = 1.0;
    s.null_space_basis.push_back(std::move(v));
  }
  return s;
}

StructureMatrix rw2(int n) {
  std::vector<Eigen::Triplet<double>> t;
  // Q = D^T D, D the (n-2) x n second-difference operator
  for (int r = 0; r + 2 < n; ++r) {
    const int idx[3] = {r, r + 1, r + 2};
    const double d[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t.emplace_back(idx[a], idx[b], d[a] * d[b]);
  }
  StructureMatrix s;
  s.kind = StructureKind::kRw2;
  s.Q = from_triplets(n, t);
  s.rank_deficiency = std::min(n, 2);
  s.null_space_basis.push_back(VectorXd::Ones(n));
  if (n >= 2) {
    VectorXd trend(n);
    for (int i = 0; i < n; ++i) trend[i] = i - 0.5 * (n - 1);
    s.null_space_basis.push_back(std::move(trend));
  }
  return s;
}

StructureMatrix ar1(int n, double rho) {
  if (!(std::abs(rho) < 1.0))
    throw InputError("AR1 requires |rho| < 1, got " + std::to_string(rho));
  std::vector<Eigen::Triplet<double>> t;
  if (n == 1) {
    t.emplace_back(0, 0, 1.0);
  } else {
    const double c = 1.0 / (1.0 - rho * rho);
    for (int i = 0; i < n; ++i) {
      const bool end = i == 0 || i == n - 1;
      t.emplace_back(i, i, c * (end ? 1.0 : 1.0 + rho * rho));
      if (i + 1 < n) {
        // kept even when rho == 0 so the sparsity pattern does not depend on rho
        t.emplace_back(i, i + 1, -c * rho);
        t.emplace_back(i + 1, i, -c * rho);
      }
    }
  }
  StructureMatrix s;
  s.kind = StructureKind::kAr1;
  s.Q = from_triplets(n, t);
  s.log_pdet = -(n - 1) * std::log1p(-rho * rho);
  return s;
}

StructureMatrix iid(int n) {
  StructureMatrix s;
  s.kind = StructureKind::kIid;
  SpMat Q(n, n);
  Q.setIdentity();
  s.Q = Q;
  return s;
}

}  // namespace

StructureMatrix structure_matrix(StructureKind kind, int size, const AdjacencyGraph* graph,
                                 double rho) {
  if (size < 1) throw InputError("structure size must be >= 1");
  StructureMatrix s;
  switch (kind) {
    case StructureKind::kIcar:
      if (!graph) throw InputError("ICAR structure requires an adjacency graph");
      s = icar(size, *graph);
      break;
    case StructureKind::kRw2: s = rw2(size); break;
    case StructureKind::kAr1: return ar1(size, rho);
    case StructureKind::kIid: return iid(size);
  }
  s.log_pdet = log_pdet_via_null_space(s.Q, s.null_space_basis);
  return s;
}

VectorXd generalized_marginal_variances(const StructureMatrix& s) {
  const int n = s.size();
  MatrixXd M = MatrixXd(s.Q);
  MatrixXd V(n, 0);
  if (!s.null_space_basis.empty()) {
    MatrixXd N(n, s.null_space_basis.size());
    for (std::size_t j = 0; j < s.null_space_basis.size(); ++j)
      N.col(static_cast<Eigen::Index>(j)) = s.null_space_basis[j];
    Eigen::HouseholderQR<MatrixXd> qr(N);
    V = qr.householderQ() * MatrixXd::Identity(n, N.cols());
    M += V * V.transpose();
  }
  // (Q + V V^T)^{-1} = Q^+ + V V^T for orthonormal V spanning null(Q)
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalError("generalized inverse: factorization failed");
  VectorXd diag = llt.solve(MatrixXd::Identity(n, n)).diagonal();
  if (V.cols() > 0) diag -= V.rowwise().squaredNorm();
  return diag;
}

StructureMatrix scale_structured(const StructureMatrix& s, const AdjacencyGraph* graph) {
  if (s.kind == StructureKind::kIid || s.kind == StructureKind::kAr1) return s;
  const int n = s.size();
  const VectorXd var = generalized_marginal_variances(s);

  std::vector<int> labels(n, 0);
  int nc = 1;
  if (s.kind == StructureKind::kIcar) {
    if (!graph) throw InputError("ICAR scaling requires the adjacency graph");
    labels = graph->component_labels();
    nc = graph->num_components();
  }
  std::vector<double> factor(nc, 1.0);
  std::vector<int> count(nc, 0);
  std::vector<double> logsum(nc, 0.0);
  for (int i = 0; i < n; ++i) {
    ++count[labels[i]];
    logsum[labels[i]] += std::log(std::max(var[i], 0.0));
  }
  StructureMatrix out = s;
  for (int c = 0; c < nc; ++c) {
    if (count[c] < 2 && s.kind == StructureKind::kIcar) continue;  // singleton
    if (n <= s.rank_deficiency) continue;                            // all null space
    factor[c] = std::exp(logsum[c] / count[c]);
    const int rank_c = s.kind == StructureKind::kIcar ? count[c] - 1 : s.rank();
    out.log_pdet += rank_c * std::log(factor[c]);
  }
  for (int k = 0; k < out.Q.outerSize(); ++k)
    for (SpMat::InnerIterator it(out.Q, k); it; ++it)
      it.valueRef() *= factor[labels[it.row()]];
  out.scaled = true;
  return out;
}

InteractionStructure interaction_precision(StructureKind space_kind,
                                           StructureKind time_kind, int num_areas,
                                           int num_cohorts, const AdjacencyGraph& graph,
                                           double rho) {
  if (space_kind != StructureKind::kIid && space_kind != StructureKind::kIcar)
    throw InputError("interaction space factor must be IID or ICAR");
  if (time_kind == StructureKind::kIcar)
    throw InputError("interaction time factor must be IID, RW2 or AR1");

  const StructureMatrix space =
      scale_structured(structure_matrix(space_kind, num_areas, &graph), &graph);
  const StructureMatrix time =
      scale_structured(structure_matrix(time_kind, num_cohorts, nullptr, rho));

  InteractionStructure out;
  auto& st = out.structure;
  st.kind = space_kind == StructureKind::kIcar ? StructureKind::kIcar : time_kind;
  st.Q = Eigen::kroneckerProduct(space.Q, time.Q).eval();
  st.Q.makeCompressed();
  st.rank_deficiency = num_areas * num_cohorts - space.rank() * time.rank();
  st.log_pdet = time.rank() * space.log_pdet + space.rank() * time.log_pdet;
  st.scaled = true;

  const int n = num_areas * num_cohorts;
  for (const auto& v : space.null_space_basis)
    for (int b = 0; b < num_cohorts; ++b) {
      VectorXd c = VectorXd::Zero(n);
      for (int i = 0; i < num_areas; ++i) c[i * num_cohorts + b] = v[i];
      out.constraints.push_back({std::move(c), true});
    }

  // e_i (x) u for each time null vector u, minus one area per space component
  // (already in the span above).
  std::vector<bool> skip(num_areas, false);
  if (!space.null_space_basis.empty()) {
    const auto labels = graph.component_labels();
    std::vector<int> last(graph.num_components(), -1);
    for (int i = 0; i < num_areas; ++i) last[labels[i]] = i;
    for (int i : last) skip[i] = true;
  }
  const bool friendly = space.null_space_basis.empty();
  for (const auto& u : time.null_space_basis)
    for (int i = 0; i < num_areas; ++i) {
      if (skip[i]) continue;
      VectorXd c = VectorXd::Zero(n);
      c.segment(i * num_cohorts, num_cohorts) = u;
      out.constraints.push_back({std::move(c), friendly});
    }
  for (const auto& c : out.constraints) st.null_space_basis.push_back(c.coef);
  return out;
}

double PcPrecisionPrior::rate() const { return -std::log(alpha) / u; }

void PcPrecisionPrior::validate() const {
  if (!(u > 0)) throw InputError("PC prior: u must be > 0");
  if (!(alpha > 0 && alpha < 1)) throw InputError("PC prior: alpha must lie in (0,1)");
}

double pc_prior_logdensity(double sigma, const PcPrecisionPrior& prior) {
  if (!(sigma > 0)) throw InputError("PC prior: sigma must be > 0");
  const double lambda = prior.rate();
  return std::log(lambda) - lambda * sigma;
}

double pc_prior_logdensity_logprec(double log_tau, const PcPrecisionPrior& prior) {
  // sigma = exp(-log_tau / 2), |d sigma / d log_tau| = sigma / 2
  const double lambda = prior.rate();
  return std::log(lambda) - std::log(2.0) - 0.5 * log_tau -
         lambda * std::exp(-0.5 * log_tau);
}

void PcCorrelationPrior::validate() const {
  if (!(u0 > -1 && u0 < 1)) throw InputError("PC correlation prior: u0 must lie in (-1,1)");
  const double lower = std::sqrt((1 - u0) / 2);
  if (!(alpha0 > lower && alpha0 < 1))
    throw InputError("PC correlation prior: alpha0 must lie in (sqrt((1-u0)/2), 1)");
}

double PcCorrelationPrior::rate() const {
  validate();
  const double d0 = std::sqrt(1 - u0);
  // Pr(rho > u0) = (1 - exp(-lambda d0)) / (1 - exp(-lambda sqrt 2)), increasing in lambda
  auto f = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    return -std::expm1(-lambda * d0) / -std::expm1(-lambda * std::sqrt(2.0)) - alpha0;
  };
  double lo = -20, hi = 1;
  while (f(hi) < 0) hi += 2;
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return std::exp(0.5 * (r.first + r.second));
}

double pc_prior_correlation_logdensity(double rho, const PcCorrelationPrior& prior) {
  if (!(std::abs(rho) < 1)) throw InputError("PC correlation prior: |rho| must be < 1");
  const double lambda = prior.rate();
  const double d = std::sqrt(1 - rho);
  return std::log(lambda) - lambda * d - std::log(2 * d) -
         std::log(-std::expm1(-lambda * std::sqrt(2.0)));
}

double pc_prior_correlation_logdensity(double rho, double u0, double alpha0) {
  return pc_prior_correlation_logdensity(rho, PcCorrelationPrior{u0, alpha0});
}

}  // namespace ricov
